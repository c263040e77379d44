#include "netpanel/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace netpanel {

using nlohmann::json;

std::vector<SaomEffect> ModelSpec::actor_effects() const {
    return saom_effects.empty() ? saom_effects_from_terms(terms) : saom_effects;
}

bool ModelSpec::has_all_coefficients() const {
    if (coefficients.size() != terms.size()) return false;
    for (const auto& c : coefficients)
        if (!c) return false;
    return true;
}

namespace {

const std::set<std::string> kTermKeys{"term", "decay", "attr", "binding", "source_wave", "coef"};

TermSpec parse_term(const json& j, const std::string& where, std::optional<double>& coef) {
    if (!j.is_object()) throw ValidationError(where + ": each term must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!kTermKeys.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
    }
    if (!j.contains("term") || !j["term"].is_string()) throw ValidationError(where + ": missing string field 'term'");
    TermSpec t = make_term(parse_term_kind(j["term"].get<std::string>()));
    if (j.contains("decay")) {
        if (!j["decay"].is_number()) throw ValidationError(where + ": 'decay' must be a number");
        t.decay = j["decay"].get<double>();
    }
    if (j.contains("attr")) {
        if (!j["attr"].is_string()) throw ValidationError(where + ": 'attr' must be a string");
        t.attr = j["attr"].get<std::string>();
    }
    if (j.contains("binding")) {
        if (!j["binding"].is_string()) throw ValidationError(where + ": 'binding' must be a string");
        t.binding = parse_binding(j["binding"].get<std::string>());
    }
    if (j.contains("source_wave")) {
        if (!j["source_wave"].is_number_integer() || j["source_wave"].get<long long>() < 1) {
            throw ValidationError(where + ": 'source_wave' must be a wave number >= 1");
        }
        t.source_wave = static_cast<WaveIndex>(j["source_wave"].get<long long>() - 1);
    }
    if (j.contains("coef")) {
        if (!j["coef"].is_number()) throw ValidationError(where + ": 'coef' must be a number");
        coef = j["coef"].get<double>();
    }
    try {
        validate_term(t);
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return t;
}

}  // namespace

ModelSpec parse_model_spec(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source + ": invalid JSON: " + e.what());
    }
    ModelSpec spec;
    const json* terms = &doc;
    if (doc.is_object()) {
        for (const auto& [key, _] : doc.items()) {
            if (key != "terms" && key != "derived_attributes" && key != "saom_effects") {
                throw ValidationError(source + ": unknown key '" + key + "'");
            }
        }
        if (!doc.contains("terms")) throw ValidationError(source + ": missing 'terms'");
        terms = &doc["terms"];
        if (doc.contains("derived_attributes")) {
            const auto& d = doc["derived_attributes"];
            if (!d.is_array()) throw ValidationError(source + ": 'derived_attributes' must be an array");
            for (std::size_t k = 0; k < d.size(); ++k) {
                const std::string where = source + ": derived_attributes[" + std::to_string(k) + "]";
                if (!d[k].is_object() || !d[k].contains("name") || !d[k].contains("transform") ||
                    !d[k]["name"].is_string() || !d[k]["transform"].is_string()) {
                    throw ValidationError(where + ": needs string fields 'name' and 'transform'");
                }
                try {
                    spec.derived.push_back({d[k]["name"].get<std::string>(), parse_transform(d[k]["transform"].get<std::string>())});
                } catch (const ValidationError& e) {
                    throw ValidationError(where + ": " + e.what());
                }
            }
        }
        if (doc.contains("saom_effects")) {
            const auto& e = doc["saom_effects"];
            if (!e.is_array()) throw ValidationError(source + ": 'saom_effects' must be an array");
            for (std::size_t k = 0; k < e.size(); ++k) {
                const std::string where = source + ": saom_effects[" + std::to_string(k) + "]";
                if (!e[k].is_object() || !e[k].contains("effect") || !e[k]["effect"].is_string()) {
                    throw ValidationError(where + ": needs string field 'effect'");
                }
                SaomEffect eff;
                try {
                    eff.kind = parse_saom_effect(e[k]["effect"].get<std::string>());
                } catch (const ValidationError& err) {
                    throw ValidationError(where + ": " + err.what());
                }
                if (e[k].contains("attr")) eff.attr = e[k]["attr"].get<std::string>();
                if (e[k].contains("decay")) eff.decay = e[k]["decay"].get<double>();
                spec.saom_effects.push_back(eff);
            }
        }
    }
    if (!terms->is_array()) throw ValidationError(source + ": terms must be an array");
    if (terms->empty()) throw ValidationError(source + ": no terms");
    for (std::size_t k = 0; k < terms->size(); ++k) {
        std::optional<double> coef;
        spec.terms.push_back(parse_term((*terms)[k], source + ": term " + std::to_string(k + 1), coef));
        spec.coefficients.push_back(coef);
    }
    return spec;
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spec file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_spec(ss.str(), path);
}

namespace {

TermSpec contemporaneous(TermKind kind, const std::string& attr) {
    TermSpec t = make_term(kind, attr);
    t.binding = Binding::Contemporaneous;
    return t;
}

std::vector<DerivedDeclaration> degree_attributes() {
    return {{"idegsqrt", AttributeTransform::SqrtIndegree}, {"odegsqrt", AttributeTransform::SqrtOutdegree}};
}

ModelSpec with_terms(std::vector<TermSpec> terms, std::vector<DerivedDeclaration> derived) {
    ModelSpec s;
    s.coefficients.assign(terms.size(), std::nullopt);
    s.terms = std::move(terms);
    s.derived = std::move(derived);
    return s;
}

}  // namespace

ModelSpec flawed_spec() {
    return with_terms({make_term(TermKind::Edges), make_term(TermKind::Mutual), make_term(TermKind::TTriple),
                       make_term(TermKind::TransitiveTies), make_term(TermKind::CTriple),
                       contemporaneous(TermKind::NodeIcov, "idegsqrt"), contemporaneous(TermKind::NodeIcov, "odegsqrt"),
                       contemporaneous(TermKind::NodeOcov, "odegsqrt"), make_term(TermKind::NodeOfactor, "sex"),
                       make_term(TermKind::NodeIfactor, "sex"), make_term(TermKind::NodeMatch, "sex"),
                       make_term(TermKind::EdgeCov, "primary"), make_term(TermKind::MemoryStability)},
                      degree_attributes());
}

ModelSpec corrected_spec() {
    return with_terms({make_term(TermKind::Edges), make_term(TermKind::Mutual), make_term(TermKind::TransitiveTies),
                       make_term(TermKind::GwespOtp), make_term(TermKind::GwespItp), make_term(TermKind::GwIndegree),
                       make_term(TermKind::TwoPath), make_term(TermKind::GwOutdegree),
                       make_term(TermKind::NodeOfactor, "sex"), make_term(TermKind::NodeIfactor, "sex"),
                       make_term(TermKind::NodeMatch, "sex"), make_term(TermKind::EdgeCov, "primary"),
                       make_term(TermKind::MemoryStability)},
                      {});
}

// Files ------------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && trim(line).back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> split_whitespace(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
    return out;
}

std::optional<double> to_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

std::vector<std::vector<double>> read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        // A line with commas is comma separated; otherwise whitespace.
        const auto fields = line.find(',') != std::string::npos ? split_commas(line) : split_whitespace(line);
        std::vector<double> row;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            auto v = to_number(fields[c]);
            if (!v) {
                throw ValidationError(path + ": row " + std::to_string(rows.size() + 1) + ", column " +
                                      std::to_string(c + 1) + ": '" + fields[c] + "' is not a number");
            }
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    if (n == 0) throw ValidationError(path + ": empty matrix");
    for (std::size_t r = 0; r < n; ++r) {
        if (rows[r].size() != n) {
            throw ValidationError(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                  " entries, expected " + std::to_string(n) + " for a square matrix");
        }
    }
    return rows;
}

Network load_adjacency(const std::string& path) {
    const auto m = read_matrix(path);
    const std::size_t n = m.size();
    Network g(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double v = m[r][c];
            const std::string cell = path + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1);
            if (v != 0.0 && v != 1.0) throw ValidationError(cell + ": non-binary entry " + format_double(v));
            if (r == c && v != 0.0) throw ValidationError(cell + ": self-loop on the diagonal");
            if (v == 1.0) g.set_tie(r, c, true);
        }
    return g;
}

namespace {

void load_node_covariates(const std::string& path, std::size_t n, std::size_t waves, Panel& panel) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open covariate file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": missing header row");
    const auto header = split_commas(line);
    std::vector<std::vector<std::string>> columns(header.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        const auto fields = split_commas(line);
        if (fields.size() != header.size()) {
            throw ValidationError(path + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) columns[c].push_back(fields[c]);
    }
    if (row != n) {
        throw ValidationError(path + ": " + std::to_string(row) + " rows, expected one per node (" + std::to_string(n) + ")");
    }

    struct Pending {
        std::map<std::size_t, std::vector<std::string>> by_wave;  // 0 = static
    };
    std::map<std::string, Pending> pending;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = header[c];
        std::size_t wave = 0;
        if (auto at = name.find('@'); at != std::string::npos) {
            const auto w = to_number(name.substr(at + 1));
            if (!w || *w < 1 || *w != std::floor(*w)) {
                throw ValidationError(path + ": column '" + name + "': expected name@wave with wave >= 1");
            }
            wave = static_cast<std::size_t>(*w);
            name = name.substr(0, at);
        }
        if (name.empty()) throw ValidationError(path + ": column " + std::to_string(c + 1) + " has no name");
        if (panel.node_covariates.count(name) || panel.dyad_covariates.count(name)) {
            throw ValidationError(path + ": covariate '" + name + "' is defined twice");
        }
        if (!pending[name].by_wave.emplace(wave, columns[c]).second) {
            throw ValidationError(path + ": column '" + header[c] + "' repeated");
        }
    }
    for (auto& [name, p] : pending) {
        if (p.by_wave.count(0) && p.by_wave.size() > 1) {
            throw ValidationError(path + ": '" + name + "' is given both as static and per-wave columns");
        }
        if (!p.by_wave.count(0)) {
            for (std::size_t w = 1; w <= waves; ++w) {
                if (!p.by_wave.count(w)) {
                    throw ValidationError(path + ": '" + name + "' has no column for wave " + std::to_string(w));
                }
            }
            if (p.by_wave.size() != waves) throw ValidationError(path + ": '" + name + "' has columns beyond the last wave");
        }
        bool numeric = true;
        for (const auto& [w, col] : p.by_wave)
            for (const auto& v : col) numeric = numeric && to_number(v).has_value();
        NodeCovariate cov;
        cov.kind = numeric ? CovariateKind::Numeric : CovariateKind::Factor;
        for (const auto& [w, col] : p.by_wave) {
            if (numeric) {
                std::vector<double> v;
                for (const auto& s : col) v.push_back(*to_number(s));
                cov.numeric.push_back(std::move(v));
            } else {
                cov.labels.push_back(col);
            }
        }
        panel.node_covariates[name] = std::move(cov);
    }
}

}  // namespace

Panel load_panel(std::span<const std::string> wave_paths, std::span<const std::string> covariate_paths) {
    if (wave_paths.size() < 2) throw ValidationError("at least two wave files are needed");
    Panel panel;
    for (const auto& p : wave_paths) {
        panel.waves.push_back(load_adjacency(p));
        if (panel.waves.back().size() != panel.waves.front().size()) {
            throw ValidationError(p + ": dimension mismatch: " + std::to_string(panel.waves.back().size()) + "x" +
                                  std::to_string(panel.waves.back().size()) + ", expected " +
                                  std::to_string(panel.waves.front().size()) + "x" +
                                  std::to_string(panel.waves.front().size()) + " as in " + wave_paths[0]);
        }
    }
    const std::size_t n = panel.node_count();
    for (const auto& entry : covariate_paths) {
        if (auto eq = entry.find('='); eq != std::string::npos) {
            const std::string name = entry.substr(0, eq);
            const std::string path = entry.substr(eq + 1);
            const auto m = read_matrix(path);
            if (m.size() != n) {
                throw ValidationError(path + ": dyadic covariate is " + std::to_string(m.size()) + "x" +
                                      std::to_string(m.size()) + ", expected " + std::to_string(n) + "x" + std::to_string(n));
            }
            if (panel.node_covariates.count(name) || panel.dyad_covariates.count(name)) {
                throw ValidationError(path + ": covariate '" + name + "' is defined twice");
            }
            DyadMatrix d{n, {}};
            for (const auto& r : m) d.values.insert(d.values.end(), r.begin(), r.end());
            panel.dyad_covariates[name] = std::move(d);
        } else {
            load_node_covariates(entry, n, panel.wave_count(), panel);
        }
    }
    panel.validate();
    return panel;
}

PanelFiles write_panel(const Panel& panel, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t n = panel.node_count();
    PanelFiles files;
    for (std::size_t t = 0; t < panel.wave_count(); ++t) {
        std::ostringstream os;
        for (NodeIndex i = 0; i < n; ++i) {
            for (NodeIndex j = 0; j < n; ++j) os << (j ? " " : "") << (panel.waves[t].tie(i, j) ? 1 : 0);
            os << "\n";
        }
        files.waves.push_back((std::filesystem::path(dir) / ("wave" + std::to_string(t + 1) + ".txt")).string());
        write_text(files.waves.back(), os.str());
    }
    if (!panel.node_covariates.empty()) {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> cols;
        for (const auto& [name, cov] : panel.node_covariates) {
            for (std::size_t w = 0; w < cov.wave_count(); ++w) {
                header.push_back(cov.is_static() ? name : name + "@" + std::to_string(w + 1));
                std::vector<std::string> col;
                for (std::size_t i = 0; i < n; ++i) {
                    col.push_back(cov.kind == CovariateKind::Numeric ? format_double(cov.numeric[w][i]) : cov.labels[w][i]);
                }
                cols.push_back(std::move(col));
            }
        }
        std::ostringstream os;
        for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
        os << "\n";
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c][i];
            os << "\n";
        }
        files.covariates.push_back((std::filesystem::path(dir) / "covariates.csv").string());
        write_text(files.covariates.back(), os.str());
    }
    for (const auto& [name, m] : panel.dyad_covariates) {
        std::ostringstream os;
        for (NodeIndex i = 0; i < n; ++i) {
            for (NodeIndex j = 0; j < n; ++j) os << (j ? " " : "") << format_double(m(i, j));
            os << "\n";
        }
        const std::string path = (std::filesystem::path(dir) / (name + ".txt")).string();
        write_text(path, os.str());
        files.covariates.push_back(name + "=" + path);
    }
    return files;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace netpanel
