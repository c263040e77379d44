#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "netpanel/evaluation.hpp"
#include "netpanel/io.hpp"
#include "netpanel/leakage_audit.hpp"

namespace netpanel {

enum class ModelFamily { Tergm, Saom };

std::string to_string(ModelFamily f);
ModelFamily parse_family(const std::string& name);

struct PipelineOptions {
    std::uint64_t seed = 1;
    /// Chain settings for MCMC-MLE; the seed field is replaced by one derived from `seed`.
    McmcConfig estimation_mcmc;
    EstimationOptions estimation;
    SaomConfig saom;
    std::size_t nsim = 1000;
    /// Burn-in and spacing of the chains that simulate a held-out wave.
    std::size_t predict_burn_in = 48000;
    std::size_t predict_thinning = 3000;
    bool allow_leakage = false;
};

struct FitResult {
    ModelFamily family = ModelFamily::Tergm;
    ParameterEstimate estimate;
    TergmModel tergm;
    SaomModel saom;
};

/// Fits the spec to every wave of the panel. A TERGM spec that gives a
/// coefficient for every term is taken as is.
FitResult fit_model(const ModelSpec& spec, const Panel& panel, ModelFamily family, const PipelineOptions& options);

struct GofRun {
    FitResult fit;
    GofReport report;
    std::vector<std::string> leaked_terms;
};

/// Holds out the last wave, fits on the rest and scores nsim simulations of
/// the held-out wave. Throws LeakageError unless options.allow_leakage.
GofRun run_gof(const Panel& panel, const ModelSpec& spec, ModelFamily family, const PipelineOptions& options);

/// Probes every derived attribute a leaking term reads, with the constant 10.
std::vector<ProbeResult> probe_leaks(const Panel& panel, const ModelSpec& spec, const PipelineOptions& options);

McmcConfig prediction_mcmc(const PipelineOptions& options, std::uint64_t stream);

// Reports ---------------------------------------------------------------------------

nlohmann::json estimate_json(const FitResult& fit);
nlohmann::json gof_json(const GofReport& report);
nlohmann::json findings_json(const std::vector<AuditFinding>& findings);
nlohmann::json probe_json(const ProbeResult& probe);

/// CSV files of a GOF report keyed by file name, each starting with `header_comment`.
std::vector<std::pair<std::string, std::string>> gof_csv(const GofReport& report, const std::string& header_comment);

}  // namespace netpanel
