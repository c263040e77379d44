#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpanel/saom.hpp"
#include "netpanel/statistics.hpp"

namespace netpanel {

/// A parsed model specification file.
struct ModelSpec {
    std::vector<TermSpec> terms;
    std::vector<DerivedDeclaration> derived;
    /// Optional fixed coefficients, one per term ("coef" in the file).
    std::vector<std::optional<double>> coefficients;
    /// Explicit actor-oriented effects; empty means "map from terms".
    std::vector<SaomEffect> saom_effects;

    std::vector<SaomEffect> actor_effects() const;
    bool has_all_coefficients() const;
};

/// Accepts either a bare array of terms or an object with "terms",
/// "derived_attributes" and "saom_effects". Waves in the file are 1-based.
/// Throws ValidationError prefixed with `source`.
ModelSpec parse_model_spec(const std::string& text, const std::string& source = "spec");
ModelSpec load_model_spec(const std::string& path);

/// The 13-term specification with degree covariates read from the
/// dependent wave, and its re-specification with endogenous terms.
ModelSpec flawed_spec();
ModelSpec corrected_spec();

/// Headerless square matrix, whitespace or comma separated.
std::vector<std::vector<double>> read_matrix(const std::string& path);
Network load_adjacency(const std::string& path);

/// Node covariate CSV: header row, one row per node in index order. A column
/// is a factor when any value is non-numeric. Columns named "name@k" give
/// the value of "name" at wave k (1-based) and must cover every wave.
/// Entries of the form "name=path" load a dyadic covariate matrix instead.
Panel load_panel(std::span<const std::string> wave_paths, std::span<const std::string> covariate_paths);

/// Writes wave1.txt ... waveT.txt, covariates.csv (node covariates, when
/// any) and <name>.txt per dyadic covariate into `dir`. Returns the
/// arguments load_panel needs to read them back.
struct PanelFiles {
    std::vector<std::string> waves;
    std::vector<std::string> covariates;
};
PanelFiles write_panel(const Panel& panel, const std::string& dir);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// FNV-1a over the bytes of `text`, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

void write_text(const std::string& path, const std::string& text);

}  // namespace netpanel
