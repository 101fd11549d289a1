#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "overprec/dataset.hpp"
#include "overprec/interval.hpp"

namespace overprec {

enum class PromptStyle { Vanilla, Cot };
enum class HintVariant { Hint1, Hint3, Hint8 };
enum class MisleadMode { Near, Far };

/// How the tail probability in the CONF block is phrased.
///   AsPrinted:     (100 - c/2)%   e.g. c=90 -> 55%
///   SymmetricTail: ((100 - c)/2)% e.g. c=90 -> 5%
enum class ConfPhrasing { AsPrinted, SymmetricTail };

enum class BlockKind { Gen, Conf, ConfK, Form, Cot, Hint, Ques };

std::string_view to_string(PromptStyle style);
std::string_view to_string(HintVariant variant);
std::string_view to_string(MisleadMode mode);
std::string_view to_string(ConfPhrasing phrasing);
std::string_view to_string(BlockKind kind);
PromptStyle prompt_style_from_string(std::string_view text);
HintVariant hint_variant_from_string(std::string_view text);
MisleadMode mislead_mode_from_string(std::string_view text);
ConfPhrasing conf_phrasing_from_string(std::string_view text);

struct InstructionBlock {
  BlockKind kind;
  std::string rendered_text;
};

struct Hint {
  HintVariant variant = HintVariant::Hint1;
  Interval interval;
};

struct PromptSpec {
  PromptStyle style = PromptStyle::Vanilla;
  double confidence = 90.0;  // percent, in (0, 100)
  std::optional<Hint> hint;
  const QuestionRecord* question = nullptr;
};

/// Named instruction templates. Placeholders are written `{name}`; braces
/// that do not enclose a lowercase identifier are literal text.
class TemplateSet {
 public:
  /// The compiled-in defaults (identical to templates/default/*.txt).
  static TemplateSet defaults();

  /// Defaults overridden by every `<name>.txt` found in `dir`.
  static TemplateSet load_dir(const std::filesystem::path& dir);

  const std::string& text(std::string_view name) const;
  void set(std::string name, std::string text);
  std::vector<std::string> names() const;

  ConfPhrasing phrasing = ConfPhrasing::AsPrinted;

 private:
  std::map<std::string, std::string, std::less<>> texts_;
};

const TemplateSet& default_templates();

/// Substitutes `{name}` placeholders. Throws TemplateError on a placeholder
/// with no value.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values);

/// The tail percentage quoted in the CONF block for confidence `c`.
double tail_percent(double confidence, ConfPhrasing phrasing);

/// Question text as it appears after "Question: ", with any context first.
std::string question_block_text(const QuestionRecord& question,
                                const TemplateSet& templates = default_templates());

/// Blocks in prompt order: GEN, CONF, CONFK, FORM, [COT], [HINT], QUES.
std::vector<InstructionBlock> build_blocks(const PromptSpec& spec,
                                           const TemplateSet& templates = default_templates());

std::string render_prompt(const PromptSpec& spec,
                          const TemplateSet& templates = default_templates());

/// One "x| y| c" line per candidate.
std::string format_candidate_line(const Candidate& candidate);

/// Self-refinement prompt listing the first `e` candidates in caller order.
std::string render_refine_prompt(const QuestionRecord& question,
                                 std::span<const Candidate> candidates, std::size_t e,
                                 const TemplateSet& templates = default_templates());

/// Hint interval placed near (possibly containing) or far from the truth.
Interval make_misleading_interval(double ground_truth, MisleadMode mode, std::uint64_t seed);

}  // namespace overprec
