#pragma once

#include <vector>

#include "defined/channel.hpp"
#include "defined/common.hpp"
#include "defined/constellation.hpp"

namespace defined {

/// Known transmitted symbols X (n_t x m) with their received signals Y (n_r x m).
struct PilotBlock {
  CMat X;
  CMat Y;
  double sigma2 = 0.0;
};

struct LmmseResult {
  CMat H_hat;
  bool used_pinv = false;  // set when sigma2 = 0 and X X^H was singular
};

/// H_hat = Y X^H (X X^H + sigma2 I)^{-1}.
LmmseResult lmmse_estimate(const PilotBlock& block);

/// argmin over joint symbols x of ||H_hat x - y||^2 (exhaustive).
long project_detect(const CMat& H_hat, const CVec& y, const Constellation& c, int n_t);

/// Decision-directed detection for t = k+1..T: re-estimate the channel from
/// pilots plus all prior decisions (treated as clean pilots), then project.
/// Returns the T-k detected indices.
std::vector<long> mmse_df_detect(const Frame& frame, const Constellation& c, int n_t);

/// Default exhaustive-search caps (cost is C^(T-1)).
int mlsd_default_cap(Modulation m);

/// Non-coherent maximum-likelihood sequence detection for SISO PSK frames:
/// maximizes |S Y^H|^2 / (sigma2 ||S||^2 + sigma2^2) - ln(||S||^2 + sigma2)
/// over all symbol sequences with S_1 pinned to `first_symbol` (resolves the
/// phase ambiguity).  Ties break toward the lexicographically smallest index
/// vector.  Returns all T indices including the pinned first one.
std::vector<long> mlsd_detect(const std::vector<cxd>& y, double sigma2,
                              const Constellation& c, long first_symbol, int t_cap);

}  // namespace defined
