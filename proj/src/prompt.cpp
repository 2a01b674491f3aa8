#include "qdacode/prompt.hpp"

#include "qdacode/error.hpp"
#include "qdacode/text.hpp"

#include <qdacode/embedded_templates.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace qdacode {

namespace {

constexpr char kContextHole = '\x01';

bool is_placeholder_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

std::string_view family(ShotType shot) {
  switch (shot) {
    case ShotType::Zero: return "zero";
    case ShotType::One: return "one";
    case ShotType::Few: return "few";
  }
  return "?";
}

// Replaces an empty-context hole plus the whitespace around it with a single
// newline (if the run spanned a line break) or a single space.
std::string close_context_hole(std::string s) {
  const auto pos = s.find(kContextHole);
  if (pos == std::string::npos) {
    return s;
  }
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n'; };
  std::size_t left = pos;
  while (left > 0 && is_ws(s[left - 1])) {
    --left;
  }
  std::size_t right = pos + 1;
  while (right < s.size() && is_ws(s[right])) {
    ++right;
  }
  const bool newline = std::any_of(s.begin() + static_cast<std::ptrdiff_t>(left),
                                   s.begin() + static_cast<std::ptrdiff_t>(right), [](char c) { return c == '\n'; });
  std::string joint = (left == 0 || right == s.size()) ? "" : (newline ? "\n" : " ");
  s.replace(left, right - left, joint);
  return s;
}

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, std::string_view what) {
  const auto folded = text::fold_label(s);
  for (auto v : values) {
    if (folded == to_string(v)) {
      return v;
    }
  }
  throw InputError(fmt::format("unknown {} '{}'", what, s));
}

constexpr std::array kShots{ShotType::Zero, ShotType::One, ShotType::Few};
constexpr std::array kLengths{PromptLength::Short, PromptLength::Medium, PromptLength::Long};
constexpr std::array kContexts{ContextLevel::None, ContextLevel::Some, ContextLevel::Full};

}  // namespace

std::string_view to_string(ShotType v) { return family(v); }

std::string_view to_string(PromptLength v) {
  switch (v) {
    case PromptLength::Short: return "short";
    case PromptLength::Medium: return "medium";
    case PromptLength::Long: return "long";
  }
  return "?";
}

std::string_view to_string(ContextLevel v) {
  switch (v) {
    case ContextLevel::None: return "none";
    case ContextLevel::Some: return "some";
    case ContextLevel::Full: return "full";
  }
  return "?";
}

ShotType parse_shot(std::string_view s) { return parse_enum(s, kShots, "shot type"); }
PromptLength parse_length(std::string_view s) { return parse_enum(s, kLengths, "prompt length"); }
ContextLevel parse_context(std::string_view s) { return parse_enum(s, kContexts, "context level"); }

std::string to_string(const Condition& c) {
  return fmt::format("{}/{}/{}", to_string(c.shot), to_string(c.length), to_string(c.context));
}

Condition parse_condition(std::string_view s) {
  const auto parts = text::split(s, '/');
  if (parts.size() != 3) {
    throw InputError(fmt::format("condition '{}' is not of the form shot/length/context", s));
  }
  return {parse_shot(parts[0]), parse_length(parts[1]), parse_context(parts[2])};
}

// ---------------------------------------------------------------------------
// Templates

TemplateSet TemplateSet::parse(std::string_view content) {
  TemplateSet set;
  std::string key;
  std::vector<std::string> body;
  const auto flush = [&] {
    if (key.empty()) {
      return;
    }
    while (!body.empty() && text::trim(body.back()).empty()) {
      body.pop_back();
    }
    std::string joined;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i) joined += '\n';
      joined += body[i];
    }
    if (joined.empty()) {
      throw InputError(fmt::format("template [{}] is empty", key));
    }
    if (!set.blocks_.emplace(key, std::move(joined)).second) {
      throw InputError(fmt::format("template [{}] defined twice", key));
    }
    body.clear();
  };

  for (auto line : text::split(content, '\n')) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.starts_with('#')) {
      continue;
    }
    if (line.starts_with('[') && line.ends_with(']')) {
      flush();
      key = line.substr(1, line.size() - 2);
      continue;
    }
    if (key.empty()) {
      if (line.starts_with("version:")) {
        set.version_ = std::stoi(text::trim(line.substr(8)));
      } else if (!text::trim(line).empty()) {
        throw InputError(fmt::format("template file: text outside a block: '{}'", line));
      }
      continue;
    }
    if (body.empty() && text::trim(line).empty()) {
      continue;
    }
    body.push_back(std::move(line));
  }
  flush();

  for (auto shot : kShots) {
    for (auto length : kLengths) {
      const auto k = fmt::format("{}.{}", family(shot), to_string(length));
      if (!set.contains(k)) {
        throw InputError(fmt::format("template file lacks block [{}]", k));
      }
    }
  }
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(fmt::format("cannot open template file '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = parse(detail::kEmbeddedTemplates);
  return set;
}

const std::string& TemplateSet::at(std::string_view key) const {
  const auto it = blocks_.find(key);
  if (it == blocks_.end()) {
    throw InputError(fmt::format("no template [{}]", key));
  }
  return it->second;
}

bool TemplateSet::contains(std::string_view key) const { return blocks_.find(key) != blocks_.end(); }

std::string TemplateSet::serialize() const {
  std::string out = fmt::format("version: {}\n", version_);
  for (const auto& [k, v] : blocks_) {
    out += fmt::format("\n[{}]\n{}\n", k, v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

std::string context_text(ContextLevel level, const Codebook& codebook) {
  const std::string* desc = nullptr;
  switch (level) {
    case ContextLevel::None: return {};
    case ContextLevel::Some: desc = &codebook.brief_description; break;
    case ContextLevel::Full: desc = &codebook.full_description; break;
  }
  auto t = text::trim(*desc);
  if (t.empty()) {
    throw InputError(fmt::format("codebook '{}' has no {} description", codebook.test_case,
                                 level == ContextLevel::Some ? "brief" : "full"));
  }
  return t;
}

RenderedPrompt render_prompt(const Condition& condition, const RequirementStatement& requirement,
                             const Codebook& codebook, const ExemplarPool& exemplars,
                             const TemplateSet& templates, const RenderOptions& options) {
  if (requirement.test_case != codebook.test_case) {
    throw InputError(fmt::format("requirement '{}' belongs to '{}', codebook is for '{}'", requirement.id,
                                 requirement.test_case, codebook.test_case));
  }
  const std::size_t shots = exemplar_count(condition.shot);
  if (exemplars.exemplars.size() < shots) {
    throw InputError(fmt::format("{} needs {} exemplars, pool has {}", to_string(condition), shots,
                                 exemplars.exemplars.size()));
  }

  auto key = fmt::format("{}.{}", family(condition.shot), to_string(condition.length));
  if (options.labeled_examples && templates.contains(key + ".labeled")) {
    key += ".labeled";
  }
  const std::string& tpl = templates.at(key);
  const std::string context = context_text(condition.context, codebook);

  std::string out;
  std::set<std::size_t> example_slots;
  bool saw_requirement = false;
  bool saw_context = false;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] != '{') {
      out += tpl[i];
      continue;
    }
    std::size_t j = i + 1;
    while (j < tpl.size() && is_placeholder_char(tpl[j])) {
      ++j;
    }
    if (j == tpl.size() || tpl[j] != '}' || j == i + 1) {
      out += tpl[i];
      continue;
    }
    const std::string_view name(tpl.data() + i + 1, j - i - 1);
    i = j;

    if (name == "requirement") {
      out += requirement.text;
      saw_requirement = true;
    } else if (name == "system_type") {
      if (codebook.system_type.empty()) {
        throw InputError(fmt::format("codebook '{}' has no system_type", codebook.test_case));
      }
      out += codebook.system_type;
    } else if (name == "context") {
      saw_context = true;
      const bool dot_follows = i + 1 < tpl.size() && tpl[i + 1] == '.';
      if (context.empty()) {
        out += kContextHole;
        if (dot_follows) ++i;
      } else {
        out += context;
        if (dot_follows && (context.back() == '.' || context.back() == '!' || context.back() == '?')) ++i;
      }
    } else if (name.starts_with("example") || name.starts_with("label")) {
      const auto digits = name.substr(name.starts_with("example") ? 7 : 5);
      std::size_t n = 0;
      for (char c : digits) {
        if (c < '0' || c > '9') {
          throw InputError(fmt::format("template [{}]: unknown placeholder {{{}}}", key, name));
        }
        n = n * 10 + static_cast<std::size_t>(c - '0');
      }
      if (n == 0 || n > shots) {
        throw InputError(fmt::format("template [{}] references {{{}}} but {} provides {} exemplars", key, name,
                                     to_string(condition), shots));
      }
      const auto& ex = exemplars.exemplars[n - 1];
      out += name.starts_with("example") ? ex.text : ex.label;
      example_slots.insert(n);
    } else {
      throw InputError(fmt::format("template [{}]: unknown placeholder {{{}}}", key, name));
    }
  }

  if (example_slots.size() != shots) {
    throw InputError(fmt::format("template [{}] has {} example slots, {} needs {}", key, example_slots.size(),
                                 to_string(condition), shots));
  }

  out = close_context_hole(std::move(out));
  if (!saw_context && !context.empty()) {
    out = context + "\n" + out;
  }
  if (!saw_requirement) {
    out += "\nRequirement: ";
    out += requirement.text;
  }

  RenderedPrompt p;
  p.text = std::move(out);
  p.condition = condition;
  p.test_case = requirement.test_case;
  p.requirement_id = requirement.id;
  for (std::size_t n = 0; n < shots; ++n) {
    p.exemplar_ids.push_back(exemplars.exemplars[n].requirement_id);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Grid

GridFilter parse_grid_filter(std::string_view shots, std::string_view lengths, std::string_view contexts) {
  GridFilter f;
  const auto each = [](std::string_view list, auto parse, auto& dest) {
    if (text::trim(list).empty()) {
      return;
    }
    for (const auto& part : text::split(list, ',')) {
      dest.push_back(parse(text::trim(part)));
    }
  };
  each(shots, parse_shot, f.shots);
  each(lengths, parse_length, f.lengths);
  each(contexts, parse_context, f.contexts);
  return f;
}

std::vector<Condition> condition_grid(const GridFilter& filter) {
  const auto allowed = [](const auto& list, auto v) {
    return list.empty() || std::find(list.begin(), list.end(), v) != list.end();
  };
  std::vector<Condition> out;
  for (auto s : kShots) {
    if (!allowed(filter.shots, s)) continue;
    for (auto l : kLengths) {
      if (!allowed(filter.lengths, l)) continue;
      for (auto c : kContexts) {
        if (!allowed(filter.contexts, c)) continue;
        out.push_back({s, l, c});
      }
    }
  }
  return out;
}

}  // namespace qdacode
