#pragma once

#include "qdacode/corpus.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qdacode {

enum class ShotType { Zero, One, Few };
enum class PromptLength { Short, Medium, Long };
enum class ContextLevel { None, Some, Full };

/// Number of exemplar blocks a prompt of this shot type carries.
constexpr std::size_t exemplar_count(ShotType shot) {
  switch (shot) {
    case ShotType::Zero: return 0;
    case ShotType::One: return 1;
    case ShotType::Few: return 3;
  }
  return 0;
}

std::string_view to_string(ShotType v);
std::string_view to_string(PromptLength v);
std::string_view to_string(ContextLevel v);

ShotType parse_shot(std::string_view s);
PromptLength parse_length(std::string_view s);
ContextLevel parse_context(std::string_view s);

/// One cell of the shot x length x context matrix.
struct Condition {
  ShotType shot = ShotType::Zero;
  PromptLength length = PromptLength::Short;
  ContextLevel context = ContextLevel::None;

  friend auto operator<=>(const Condition&, const Condition&) = default;
};

/// "few/long/full"
std::string to_string(const Condition& c);
Condition parse_condition(std::string_view s);

struct RenderedPrompt {
  std::string text;
  Condition condition;
  std::string test_case;
  std::string requirement_id;
  std::vector<std::string> exemplar_ids;
};

/// Keyed template blocks, e.g. "few.long" or "few.medium.labeled".
class TemplateSet {
public:
  static TemplateSet parse(std::string_view content);
  static TemplateSet load(const std::filesystem::path& path);
  /// The template file shipped with the library.
  static const TemplateSet& builtin();

  const std::string& at(std::string_view key) const;
  bool contains(std::string_view key) const;
  int version() const { return version_; }
  const std::map<std::string, std::string, std::less<>>& blocks() const { return blocks_; }

  /// Canonical text used for content hashing of run manifests.
  std::string serialize() const;

private:
  int version_ = 0;
  std::map<std::string, std::string, std::less<>> blocks_;
};

struct RenderOptions {
  /// Prefer the ".labeled" variant of short/medium deductive templates. Off by
  /// default so the templates go out exactly as published.
  bool labeled_examples = false;
};

std::string context_text(ContextLevel level, const Codebook& codebook);

RenderedPrompt render_prompt(const Condition& condition, const RequirementStatement& requirement,
                             const Codebook& codebook, const ExemplarPool& exemplars,
                             const TemplateSet& templates = TemplateSet::builtin(),
                             const RenderOptions& options = {});

struct GridFilter {
  std::vector<ShotType> shots;
  std::vector<PromptLength> lengths;
  std::vector<ContextLevel> contexts;
};

/// Parses comma-separated filter values such as "few,one"; empty input means
/// no filter on that axis.
GridFilter parse_grid_filter(std::string_view shots, std::string_view lengths, std::string_view contexts);

/// Cross product in shot-major, then length, then context order.
std::vector<Condition> condition_grid(const GridFilter& filter = {});

}  // namespace qdacode
