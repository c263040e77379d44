#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netpanel/saom.hpp"
#include "netpanel/tergm.hpp"

namespace netpanel {

struct HoldoutSplit {
    /// Waves before the test wave; the only data estimation may see.
    Panel training;
    Network test;
    WaveIndex test_wave = 0;
    /// Panel that covariate terms resolve against when predicting the test
    /// wave. Equal to `training` unless leakage was explicitly allowed, in
    /// which case the test wave is included so its derived attributes exist.
    Panel covariate_source;
    /// Terms that read the test wave (non-empty only under the override).
    std::vector<std::string> leaked_terms;
    std::vector<std::string> warnings;
};

/// Terms whose covariate would be read from `wave` or later when the
/// dependent wave is `dependent_wave`.
std::vector<std::string> terms_reading_future(std::span<const TermSpec> terms,
                                              std::span<const DerivedDeclaration> derived, const Panel& panel,
                                              WaveIndex dependent_wave, WaveIndex wave);

/// Splits off the last wave. Throws LeakageError naming every term that
/// would read the test wave, unless allow_leakage is set.
HoldoutSplit holdout_split(const Panel& panel, WaveIndex test_wave, std::span<const TermSpec> terms,
                           std::span<const DerivedDeclaration> derived, bool allow_leakage);

/// nsim networks for the test wave, each conditional on the last training
/// wave. The chain starts at that wave and keeps a state every cfg.thinning
/// proposals after cfg.burn_in; cfg.sample_size is ignored.
std::vector<Network> predict_wave(const TergmModel& model, std::span<const DerivedDeclaration> derived,
                                  const HoldoutSplit& split, std::size_t nsim, const McmcConfig& cfg,
                                  std::span<const CovariateOverride> overrides = {});

/// nsim independent replicates of one period at the last training rate.
std::vector<Network> predict_wave(const SaomModel& model, const HoldoutSplit& split, std::size_t nsim,
                                  std::uint64_t seed);

struct Envelope {
    std::vector<double> observed;
    std::vector<double> min, q05, median, q95, max;
};

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;  // fpr for ROC, recall for PR
    double y = 0.0;  // tpr for ROC, precision for PR
};

struct TiePrediction {
    std::vector<CurvePoint> roc;
    std::vector<CurvePoint> pr;
    double auc_roc = 0.0;
    double auc_pr = 0.0;
};

struct GofReport {
    Envelope esp;
    Envelope dsp;
    Envelope indegree;
    /// Buckets 1..n-1, then one bucket for unreachable pairs.
    Envelope geodesic;
    TiePrediction ties;
    std::size_t nsim = 0;
    std::vector<std::string> warnings;
};

/// ROC and PR from a threshold sweep over the distinct scores (descending).
/// ROC starts at (0,0) and ends at (1,1); AUC_ROC is trapezoidal and AUC_PR
/// a step integral over recall. AUCs are NaN when truth has only one class.
TiePrediction tie_prediction(std::span<const double> scores, std::span<const int> truth);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

GofReport score(std::span<const Network> sims, const Network& observed);

}  // namespace netpanel
