#pragma once

#include <string>
#include <vector>

#include "morphlm/morphology/analyzer.hpp"

namespace morphlm::tagger {

// Active range of one unnormalized measure before sigmoid mapping.
struct SigmoidRange {
  double z_a = 0.0;
  double z_b = 1.0;
};

struct TaggerConfig {
  SigmoidRange range_m;  // morphology score
  SigmoidRange range_p;  // precedence weight
  SigmoidRange range_a;  // agreement score
  double outer_exponent = 8.0;
  double alpha = 0.1;              // transition table smoothing
  double triple_min_count = 5.0;   // back off below this context count
};

// sigma(z | z_A, z_B) = [1 + exp(-8 (z - z_A)/(z_B - z_A))]^(-outer).
// The outer exponent defaults to the published 8 (configurable because the
// value is unusual enough to want a switch).
double sigma(double z, const SigmoidRange& r, double outer_exponent = 8.0);

// One candidate tag at one token, with its factored emission score.
struct EmissionEntry {
  int token = -1;
  int tag = -1;
  double p_m = 0.0;
  double p_p = 0.0;
  double p_a = 0.0;
  double mapped = 0.0;  // sigma(p_m) * sigma(p_p) * sigma(p_a)
  morphology::Analysis analysis;
};

using TokenEmissions = std::vector<EmissionEntry>;
using SentenceEmissions = std::vector<TokenEmissions>;

// Candidate tags with mapped emission scores for token t; one entry per
// distinct tag, carrying the best-scoring analysis for that tag.
TokenEmissions emission_at(
    const morphology::Analyzer& analyzer,
    const std::vector<std::vector<morphology::Analysis>>& sentence,
    std::size_t t, const TaggerConfig& cfg);

SentenceEmissions emission(
    const morphology::Analyzer& analyzer,
    const std::vector<std::vector<morphology::Analysis>>& sentence,
    const TaggerConfig& cfg);

// First-order transition measures estimated from corpus-level soft counts.
// Rows are the conditioning context and normalize to 1.
struct TransitionTables {
  std::vector<std::string> tags;
  double alpha = 0.1;
  double triple_min_count = 5.0;
  std::vector<std::vector<double>> forward;   // [prev][cur]
  std::vector<std::vector<double>> backward;  // [next][cur]
  std::vector<std::vector<std::vector<double>>> triple;  // [prev][next][cur]
  std::vector<std::vector<double>> context_count;        // raw (prev,next)

  int n() const { return static_cast<int>(tags.size()); }

  static TransitionTables uniform(std::vector<std::string> tag_names);

  double log_forward(int prev, int cur) const;
  double log_backward(int next, int cur) const;
  // Triple measure with forward*backward backoff under the context count.
  double log_both(int prev, int next, int cur) const;

  std::string to_json() const;
  static TransitionTables from_json(std::string_view text,
                                    const std::string& origin);
  void save(const std::string& path) const;
  static TransitionTables load(const std::string& path);
};

// Pair/triple co-occurrence soft counts weighted by normalized per-token
// emission marginals, smoothed by alpha and row-normalized.
TransitionTables estimate_transitions(
    const std::vector<SentenceEmissions>& corpus,
    const std::vector<std::string>& tag_names, double alpha,
    double triple_min_count = 5.0);

struct DecodeResult {
  std::vector<int> tags;        // per token
  std::vector<double> log_scores;  // final per-token decision scores
};

// Greedy bidirectional inference: tokens decoded in decreasing order of
// max-over-tags mapped emission, each assigned the argmax of the first-order
// case expression given which neighbors are already decoded.
DecodeResult decode_bidirectional(const SentenceEmissions& entries,
                                  const TransitionTables& tables,
                                  const std::vector<double>& precedence);

// Exact argmax of emission * forward-transition products, in log space.
DecodeResult decode_viterbi(const SentenceEmissions& entries,
                            const TransitionTables& tables,
                            const std::vector<double>& precedence);

}  // namespace morphlm::tagger
