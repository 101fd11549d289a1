#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "overprec/dataset.hpp"
#include "overprec/gateway.hpp"
#include "overprec/interval.hpp"

namespace overprec {

enum class LengthKind { Constant, ProportionalToConfidence, ScaleRelative };

/// Width of emitted intervals.
///   Constant:                 width = value
///   ProportionalToConfidence: width = value * c
///   ScaleRelative:            width = value * max(|a|, 1)
struct LengthPolicy {
  LengthKind kind = LengthKind::ScaleRelative;
  double value = 0.2;

  double width(double confidence, double ground_truth) const;
};

std::string_view to_string(LengthKind kind);
LengthKind length_kind_from_string(std::string_view text);

/// How the simulated responder answers a self-refinement prompt.
struct RefineScript {
  enum class Proposal { Hull, Fixed, Chosen };

  std::size_t chosen_index = 0;  // clamped to the candidate count
  Proposal proposal = Proposal::Hull;
  Interval fixed{0.0, 0.0};  // used by Proposal::Fixed
};

struct SimulatedResponderProfile {
  double coverage = 0.75;
  LengthPolicy length;
  double length_jitter = 0.0;  // width *= 1 + U(-j, j)
  double malform_rate = 0.0;
  std::uint64_t seed = 0;
  RefineScript refine;

  void validate() const;
};

nlohmann::json profile_to_json(const SimulatedResponderProfile& profile);
SimulatedResponderProfile profile_from_json(const nlohmann::json& json);

/// One FORM-formatted answer, or garbled text with probability malform_rate.
/// Pure function of (profile, question id, ground truth, confidence, tag).
std::string simulate(const SimulatedResponderProfile& profile, const QuestionRecord& question,
                     double confidence, std::string_view trial_tag);

/// A reply to the self-refinement prompt: a JSON object in a code fence.
std::string simulate_refinement(const SimulatedResponderProfile& profile,
                                const QuestionRecord& question,
                                std::span<const Candidate> candidates, std::string_view trial_tag);

/// In-process backend answering from the structured request fields.
class SimulatedBackend : public Backend {
 public:
  explicit SimulatedBackend(SimulatedResponderProfile profile);

  std::string identity() const override;
  AttemptResult attempt(const CompletionRequest& request) override;
  bool wall_clock() const override { return false; }

  const SimulatedResponderProfile& profile() const { return profile_; }

 private:
  SimulatedResponderProfile profile_;
};

}  // namespace overprec
