#include "overprec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"
#include "overprec/parser.hpp"
#include "overprec/rng.hpp"

namespace overprec {
namespace {

constexpr std::string_view kGarbled[] = {
    "I'm sorry, but I can't determine that from the information given.",
    "The answer depends on factors that are not stated in the question.",
    "lower_bound: unknown, upper_bound: unknown",
    "Let me think about this step by step... the figure is somewhere in the report.",
};

std::string_view to_string(RefineScript::Proposal proposal) {
  switch (proposal) {
    case RefineScript::Proposal::Hull: return "hull";
    case RefineScript::Proposal::Fixed: return "fixed";
    case RefineScript::Proposal::Chosen: return "chosen";
  }
  return "hull";
}

RefineScript::Proposal proposal_from_string(std::string_view text) {
  if (text == "hull") return RefineScript::Proposal::Hull;
  if (text == "fixed") return RefineScript::Proposal::Fixed;
  if (text == "chosen") return RefineScript::Proposal::Chosen;
  throw ConfigError(fmt::format("unknown refine proposal '{}'", text));
}

double jittered_width(const SimulatedResponderProfile& profile, double confidence,
                      double ground_truth, Rng& rng) {
  double width = profile.length.width(confidence, ground_truth);
  const double jitter = rng.uniform(-1.0, 1.0);
  if (profile.length_jitter > 0.0) width *= 1.0 + profile.length_jitter * jitter;
  return std::max(width, 0.0);
}

}  // namespace

double LengthPolicy::width(double confidence, double ground_truth) const {
  switch (kind) {
    case LengthKind::Constant: return value;
    case LengthKind::ProportionalToConfidence: return value * confidence;
    case LengthKind::ScaleRelative: return value * std::max(std::abs(ground_truth), 1.0);
  }
  return value;
}

std::string_view to_string(LengthKind kind) {
  switch (kind) {
    case LengthKind::Constant: return "constant";
    case LengthKind::ProportionalToConfidence: return "proportional_to_confidence";
    case LengthKind::ScaleRelative: return "scale_relative";
  }
  return "constant";
}

LengthKind length_kind_from_string(std::string_view text) {
  if (text == "constant") return LengthKind::Constant;
  if (text == "proportional_to_confidence") return LengthKind::ProportionalToConfidence;
  if (text == "scale_relative") return LengthKind::ScaleRelative;
  throw ConfigError(fmt::format("unknown length policy '{}'", text));
}

void SimulatedResponderProfile::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(coverage)) throw ConfigError("simulator coverage must be in [0, 1]");
  if (!unit(malform_rate)) throw ConfigError("simulator malform_rate must be in [0, 1]");
  if (!(length.value >= 0.0) || !std::isfinite(length.value)) {
    throw ConfigError("simulator length value must be finite and >= 0");
  }
  if (!(length_jitter >= 0.0 && length_jitter < 1.0)) {
    throw ConfigError("simulator length_jitter must be in [0, 1)");
  }
  if (refine.fixed.lower > refine.fixed.upper) {
    throw ConfigError("simulator refine.fixed must have lower <= upper");
  }
}

nlohmann::json profile_to_json(const SimulatedResponderProfile& profile) {
  return {
      {"coverage", profile.coverage},
      {"length", {{"policy", to_string(profile.length.kind)}, {"value", profile.length.value}}},
      {"length_jitter", profile.length_jitter},
      {"malform_rate", profile.malform_rate},
      {"seed", profile.seed},
      {"refine",
       {{"chosen_index", profile.refine.chosen_index},
        {"proposal", to_string(profile.refine.proposal)},
        {"fixed", {profile.refine.fixed.lower, profile.refine.fixed.upper}}}},
  };
}

SimulatedResponderProfile profile_from_json(const nlohmann::json& json) {
  SimulatedResponderProfile profile;
  try {
    profile.coverage = json.value("coverage", profile.coverage);
    if (json.contains("length")) {
      const auto& length = json["length"];
      profile.length.kind =
          length_kind_from_string(length.value("policy", std::string(to_string(profile.length.kind))));
      profile.length.value = length.value("value", profile.length.value);
    }
    profile.length_jitter = json.value("length_jitter", profile.length_jitter);
    profile.malform_rate = json.value("malform_rate", profile.malform_rate);
    profile.seed = json.value("seed", profile.seed);
    if (json.contains("refine")) {
      const auto& refine = json["refine"];
      profile.refine.chosen_index = refine.value("chosen_index", profile.refine.chosen_index);
      profile.refine.proposal = proposal_from_string(refine.value("proposal", std::string("hull")));
      if (refine.contains("fixed")) {
        const auto& fixed = refine["fixed"];
        if (!fixed.is_array() || fixed.size() != 2) {
          throw ConfigError("simulator refine.fixed must be [lower, upper]");
        }
        profile.refine.fixed = {fixed[0].get<double>(), fixed[1].get<double>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("invalid simulator profile: {}", e.what()));
  }
  profile.validate();
  return profile;
}

std::string simulate(const SimulatedResponderProfile& profile, const QuestionRecord& question,
                     double confidence, std::string_view trial_tag) {
  Rng rng(derive_seed(profile.seed, question.id, format_number(confidence), trial_tag));
  // Every draw below is taken unconditionally so that changing one rate does
  // not shift the stream for the others.
  const bool garbled = rng.bernoulli(profile.malform_rate);
  const std::size_t garbled_pick = rng.index(std::size(kGarbled));
  const bool contains = rng.bernoulli(profile.coverage);
  const double width = jittered_width(profile, confidence, question.ground_truth, rng);
  const double offset = rng.uniform();
  const double gap_fraction = rng.uniform(0.05, 0.5);
  const bool above = rng.bernoulli(0.5);

  if (garbled) return std::string(kGarbled[garbled_pick]);

  const double a = question.ground_truth;
  double lower = 0.0;
  double upper = 0.0;
  if (contains) {
    lower = std::min(a - offset * width, a);
    upper = std::max(lower + width, a);
  } else {
    const double gap = gap_fraction * width + 1e-6 * std::max(std::abs(a), 1.0);
    if (above) {
      lower = a + gap;
      if (lower <= a) lower = std::nextafter(a, std::numeric_limits<double>::infinity());
      upper = lower + width;
    } else {
      upper = a - gap;
      if (upper >= a) upper = std::nextafter(a, -std::numeric_limits<double>::infinity());
      lower = upper - width;
    }
  }
  return format_interval_answer(lower, upper);
}

std::string simulate_refinement(const SimulatedResponderProfile& profile,
                                const QuestionRecord& question,
                                std::span<const Candidate> candidates, std::string_view trial_tag) {
  Rng rng(derive_seed(profile.seed, question.id, "refine", trial_tag));
  if (rng.bernoulli(profile.malform_rate) || candidates.empty()) {
    return "Among the answers above, the second one looks the most plausible to me.";
  }

  const auto& chosen = candidates[std::min(profile.refine.chosen_index, candidates.size() - 1)];
  Interval proposed = chosen.interval();
  switch (profile.refine.proposal) {
    case RefineScript::Proposal::Hull:
      for (const auto& candidate : candidates) {
        proposed.lower = std::min(proposed.lower, candidate.lower);
        proposed.upper = std::max(proposed.upper, candidate.upper);
      }
      break;
    case RefineScript::Proposal::Fixed:
      proposed = profile.refine.fixed;
      break;
    case RefineScript::Proposal::Chosen:
      break;
  }

  const nlohmann::json reply = {
      {"chosen_answer", {chosen.lower, chosen.upper}},
      {"chosen_reason", "It is consistent with most of the other answers."},
      {"proposed_answer", {proposed.lower, proposed.upper}},
      {"proposed_reason", "It covers the range where the answers agree."},
  };
  return fmt::format("Here is my assessment.\n```json\n{}\n```", reply.dump(2));
}

SimulatedBackend::SimulatedBackend(SimulatedResponderProfile profile)
    : profile_(std::move(profile)) {
  profile_.validate();
}

std::string SimulatedBackend::identity() const {
  return "sim|" + profile_to_json(profile_).dump();
}

AttemptResult SimulatedBackend::attempt(const CompletionRequest& request) {
  AttemptResult result;
  if (request.question == nullptr) {
    result.status = AttemptResult::Status::Fatal;
    result.error = "simulated backend needs the structured question";
    return result;
  }
  if (request.kind == RequestKind::Refinement) {
    result.content =
        simulate_refinement(profile_, *request.question, request.candidates, request.trial_tag);
  } else {
    result.content = simulate(profile_, *request.question, request.confidence, request.trial_tag);
  }
  return result;
}

}  // namespace overprec
