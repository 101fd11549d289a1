#include "overprec/prompt.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "embedded_templates.hpp"
#include "overprec/error.hpp"
#include "overprec/numeric.hpp"
#include "overprec/rng.hpp"

namespace overprec {
namespace {

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

std::string strip_trailing_newlines(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string_view hint_template_name(HintVariant variant) { return to_string(variant); }

}  // namespace

std::string question_block_text(const QuestionRecord& question, const TemplateSet& templates) {
  if (!question.context) return question.question_text;
  return render_template(templates.text("context"), {{"context", *question.context}}) + "\n" +
         question.question_text;
}

std::string_view to_string(PromptStyle style) {
  return style == PromptStyle::Vanilla ? "vanilla" : "cot";
}

std::string_view to_string(HintVariant variant) {
  switch (variant) {
    case HintVariant::Hint1: return "hint1";
    case HintVariant::Hint3: return "hint3";
    case HintVariant::Hint8: return "hint8";
  }
  return "hint1";
}

std::string_view to_string(MisleadMode mode) { return mode == MisleadMode::Near ? "near" : "far"; }

std::string_view to_string(ConfPhrasing phrasing) {
  return phrasing == ConfPhrasing::AsPrinted ? "as_printed" : "symmetric_tail";
}

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Gen: return "GEN";
    case BlockKind::Conf: return "CONF";
    case BlockKind::ConfK: return "CONFK";
    case BlockKind::Form: return "FORM";
    case BlockKind::Cot: return "COT";
    case BlockKind::Hint: return "HINT";
    case BlockKind::Ques: return "QUES";
  }
  return "?";
}

PromptStyle prompt_style_from_string(std::string_view text) {
  if (text == "vanilla") return PromptStyle::Vanilla;
  if (text == "cot" || text == "CoT") return PromptStyle::Cot;
  throw ConfigError(fmt::format("unknown prompting style '{}'", text));
}

HintVariant hint_variant_from_string(std::string_view text) {
  if (text == "hint1") return HintVariant::Hint1;
  if (text == "hint3") return HintVariant::Hint3;
  if (text == "hint8") return HintVariant::Hint8;
  throw ConfigError(fmt::format("unknown hint variant '{}'", text));
}

MisleadMode mislead_mode_from_string(std::string_view text) {
  if (text == "near") return MisleadMode::Near;
  if (text == "far") return MisleadMode::Far;
  throw ConfigError(fmt::format("unknown misleading mode '{}'", text));
}

ConfPhrasing conf_phrasing_from_string(std::string_view text) {
  if (text == "as_printed") return ConfPhrasing::AsPrinted;
  if (text == "symmetric_tail") return ConfPhrasing::SymmetricTail;
  throw ConfigError(fmt::format("unknown CONF phrasing '{}'", text));
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  for (const auto& [name, text] : detail::kEmbeddedTemplates) {
    set.texts_.emplace(std::string(name), strip_trailing_newlines(std::string(text)));
  }
  return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw TemplateError(fmt::format("template directory '{}' not found", dir.string()));
  }
  TemplateSet set = defaults();
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    set.set(entry.path().stem().string(), strip_trailing_newlines(buffer.str()));
  }
  return set;
}

const std::string& TemplateSet::text(std::string_view name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw TemplateError(fmt::format("no template named '{}'", name));
  return it->second;
}

void TemplateSet::set(std::string name, std::string text) {
  texts_[std::move(name)] = std::move(text);
}

std::vector<std::string> TemplateSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : texts_) out.push_back(name);
  return out;
}

const TemplateSet& default_templates() {
  static const TemplateSet instance = TemplateSet::defaults();
  return instance;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_placeholder_char(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        const std::string_view name = tmpl.substr(i + 1, j - i - 1);
        auto it = values.find(name);
        if (it == values.end()) {
          throw TemplateError(fmt::format("unknown placeholder '{{{}}}' in template", name));
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

double tail_percent(double confidence, ConfPhrasing phrasing) {
  return phrasing == ConfPhrasing::AsPrinted ? 100.0 - confidence / 2.0
                                             : (100.0 - confidence) / 2.0;
}

std::vector<InstructionBlock> build_blocks(const PromptSpec& spec, const TemplateSet& templates) {
  if (spec.question == nullptr) throw TemplateError("prompt spec has no question");
  if (!(spec.confidence > 0.0 && spec.confidence < 100.0)) {
    throw TemplateError(fmt::format("confidence {} outside (0, 100)", spec.confidence));
  }

  const std::map<std::string, std::string, std::less<>> values = {
      {"confidence", format_number(spec.confidence)},
      {"tail_percent", format_number(tail_percent(spec.confidence, templates.phrasing))},
  };

  std::vector<InstructionBlock> blocks;
  blocks.push_back({BlockKind::Gen, render_template(templates.text("gen"), values)});
  blocks.push_back({BlockKind::Conf, render_template(templates.text("conf"), values)});
  blocks.push_back({BlockKind::ConfK, render_template(templates.text("confk"), values)});
  blocks.push_back({BlockKind::Form, render_template(templates.text("form"), values)});
  if (spec.style == PromptStyle::Cot) {
    blocks.push_back({BlockKind::Cot, render_template(templates.text("cot"), values)});
  }
  if (spec.hint) {
    const Interval& hint = spec.hint->interval;
    if (!std::isfinite(hint.lower) || !std::isfinite(hint.upper) || hint.lower > hint.upper) {
      throw TemplateError("hint interval must be finite with lower <= upper");
    }
    blocks.push_back({BlockKind::Hint,
                      render_template(templates.text(hint_template_name(spec.hint->variant)),
                                      {{"hint_low", format_number(hint.lower)},
                                       {"hint_high", format_number(hint.upper)}})});
  }
  blocks.push_back(
      {BlockKind::Ques,
       render_template(templates.text("ques"),
                       {{"question", question_block_text(*spec.question, templates)}})});
  return blocks;
}

std::string render_prompt(const PromptSpec& spec, const TemplateSet& templates) {
  std::string out;
  for (const auto& block : build_blocks(spec, templates)) {
    if (!out.empty()) out.push_back('\n');
    out += block.rendered_text;
  }
  return out;
}

std::string format_candidate_line(const Candidate& candidate) {
  return fmt::format("{}| {}| {}", format_number(candidate.lower), format_number(candidate.upper),
                     format_number(candidate.confidence));
}

std::string render_refine_prompt(const QuestionRecord& question,
                                 std::span<const Candidate> candidates, std::size_t e,
                                 const TemplateSet& templates) {
  if (e < 1 || e > candidates.size()) {
    throw TemplateError(
        fmt::format("refinement needs 1 <= e <= {} candidates, got e = {}", candidates.size(), e));
  }
  std::string lines;
  for (std::size_t i = 0; i < e; ++i) {
    if (i > 0) lines.push_back('\n');
    lines += format_candidate_line(candidates[i]);
  }
  return render_template(templates.text("refine"),
                         {{"question", question_block_text(question, templates)},
                          {"answers", lines}});
}

Interval make_misleading_interval(double ground_truth, MisleadMode mode, std::uint64_t seed) {
  Rng rng(seed);
  if (mode == MisleadMode::Near) {
    const double center = std::abs(ground_truth) > 1.0
                              ? ground_truth * rng.uniform(0.5, 1.5)
                              : ground_truth + rng.uniform(-1.0, 1.0);
    const double width = std::max(0.2 * std::abs(center), 0.5);
    return {center - width / 2.0, center + width / 2.0};
  }

  // The nearest endpoint sits at least 10|a| + 10 away from the truth a.
  const double min_distance = 10.0 * std::abs(ground_truth) + 10.0;
  const double distance = min_distance * rng.uniform(1.1, 2.1);
  const bool above = rng.bernoulli(0.5);
  const double near_end = above ? ground_truth + distance : ground_truth - distance;
  const double width = std::max(0.2 * std::abs(near_end), 0.5);
  return above ? Interval{near_end, near_end + width} : Interval{near_end - width, near_end};
}

}  // namespace overprec
