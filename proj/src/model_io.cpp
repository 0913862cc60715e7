#include "kshrl/model_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "json.hpp"

#include "kshrl/error.hpp"
#include "kshrl/names.hpp"

namespace kshrl {

using nlohmann::json;

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    if (s.empty()) throw InputError("model file: empty number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw InputError("model file: bad number '" + s + "'");
    return v;
}

namespace {

json encode(double v) { return hex_double(v); }

json encode(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(encode(x));
    return out;
}

json encode(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(encode(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

const json& field(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) throw InputError(std::string("model file: missing field '") + key + "'");
    return obj.at(key);
}

double decode_double(const json& j) {
    if (!j.is_string()) throw InputError("model file: numbers must be hex-float strings");
    return parse_hex_double(j.get<std::string>());
}

std::vector<double> decode_vector(const json& j) {
    if (!j.is_array()) throw InputError("model file: expected an array");
    std::vector<double> out;
    for (const auto& x : j) out.push_back(decode_double(x));
    return out;
}

Eigen::MatrixXd decode_matrix(const json& j, Eigen::Index cols) {
    if (!j.is_array()) throw InputError("model file: expected a matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::vector<double> row = decode_vector(j[i]);
        if (static_cast<Eigen::Index>(row.size()) != cols) throw InputError("model file: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

template <typename T>
T get(const json& obj, const char* key) {
    try {
        return field(obj, key).get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("model file: field '") + key + "' has the wrong type");
    }
}

}  // namespace

void write_model(std::ostream& out, const FittedModel& model) {
    const LocalModelGrid& grid = model.grid;
    const FeatureMap& features = grid.features;
    const FeatureLayout& layout = features.layout();
    json j;
    j["format_version"] = kModelFormatVersion;

    json norm;
    norm["min"] = encode(model.normalization.min);
    norm["max"] = encode(model.normalization.max);
    if (model.normalization.candidate_range) {
        norm["candidate_range"] = {encode(model.normalization.candidate_range->first),
                                   encode(model.normalization.candidate_range->second)};
    } else {
        norm["candidate_range"] = nullptr;
    }
    j["normalization"] = norm;

    json basis;
    basis["family"] = to_string(features.spec().family);
    basis["m"] = features.spec().m;
    basis["degree"] = features.spec().degree;
    basis["knots"] = encode(features.spec().knots);
    basis["centering_means"] = encode(features.stats().means);
    j["basis"] = basis;

    json lay;
    lay["dim"] = layout.dim;
    lay["excluded"] = layout.excluded ? json(*layout.excluded) : json(nullptr);
    lay["num_blocks"] = layout.num_blocks;
    j["layout"] = lay;

    j["kernel"] = {{"family", to_string(grid.kernel.family)}, {"bandwidth", encode(grid.kernel.bandwidth)}};
    j["mode"] = to_string(grid.mode);
    j["candidate"] = {{"kind", to_string(grid.candidate.kind)}, {"feature", grid.candidate.feature}};
    j["gamma"] = encode(grid.gamma);
    j["zs"] = encode(grid.zs);
    j["B"] = encode(grid.B);

    json diags = json::array();
    for (const FitDiagnostics& d : grid.diagnostics) {
        diags.push_back({{"z", encode(d.z)},
                         {"iterations", d.iterations},
                         {"converged", d.converged},
                         {"ess", encode(d.ess)},
                         {"last_change", encode(d.last_change)},
                         {"step_size", encode(d.step_size)},
                         {"warnings", d.warnings}});
    }
    j["diagnostics"] = diags;
    j["dropped"] = model.dropped;
    j["warnings"] = model.warnings;
    out << j.dump(1) << '\n';
}

FittedModel read_model(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("model file is not valid JSON: ") + e.what());
    }
    const int version = get<int>(j, "format_version");
    if (version != kModelFormatVersion) {
        throw InputError("model file format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kModelFormatVersion) + ")");
    }
    FittedModel model;

    const json& norm = field(j, "normalization");
    model.normalization.min = decode_vector(field(norm, "min"));
    model.normalization.max = decode_vector(field(norm, "max"));
    const json& range = field(norm, "candidate_range");
    if (!range.is_null()) {
        if (!range.is_array() || range.size() != 2) throw InputError("model file: candidate_range needs two values");
        model.normalization.candidate_range = std::make_pair(decode_double(range[0]), decode_double(range[1]));
    }

    const json& basis_j = field(j, "basis");
    BasisSpec spec;
    spec.family = parse_basis_family(get<std::string>(basis_j, "family"));
    spec.m = get<std::size_t>(basis_j, "m");
    spec.degree = get<int>(basis_j, "degree");
    spec.knots = decode_vector(field(basis_j, "knots"));
    spec.validate();

    const json& lay = field(j, "layout");
    FeatureLayout layout;
    layout.dim = get<std::size_t>(lay, "dim");
    if (!field(lay, "excluded").is_null()) layout.excluded = get<std::size_t>(lay, "excluded");
    layout.num_blocks = get<std::size_t>(lay, "num_blocks");
    layout.m = spec.m;
    if (layout.dim == 0 || layout.num_blocks == 0 || (layout.excluded && *layout.excluded >= layout.dim)) {
        throw InputError("model file: inconsistent layout");
    }
    if (model.normalization.min.size() != layout.dim || model.normalization.max.size() != layout.dim) {
        throw InputError("model file: normalization does not match the state dimension");
    }

    CenteringStats stats;
    stats.means = decode_matrix(field(basis_j, "centering_means"), static_cast<Eigen::Index>(spec.m));
    if (static_cast<std::size_t>(stats.means.rows()) != layout.dim) {
        throw InputError("model file: centering means do not match the state dimension");
    }

    LocalModelGrid& grid = model.grid;
    grid.features = FeatureMap(spec, stats, layout);
    const json& kernel_j = field(j, "kernel");
    grid.kernel.family = parse_kernel_family(get<std::string>(kernel_j, "family"));
    grid.kernel.bandwidth = decode_double(field(kernel_j, "bandwidth"));
    grid.kernel.validate();
    grid.mode = parse_action_mode(get<std::string>(j, "mode"));
    const json& cand = field(j, "candidate");
    grid.candidate.kind = parse_candidate_kind(get<std::string>(cand, "kind"));
    grid.candidate.feature = get<std::size_t>(cand, "feature");
    if (grid.candidate.excluded_feature() != layout.excluded) {
        throw InputError("model file: candidate and excluded feature disagree");
    }
    grid.gamma = decode_double(field(j, "gamma"));
    grid.zs = decode_vector(field(j, "zs"));
    grid.B = decode_matrix(field(j, "B"), static_cast<Eigen::Index>(layout.num_coefficients()));
    if (static_cast<std::size_t>(grid.B.rows()) != grid.zs.size() || grid.zs.empty()) {
        throw InputError("model file: B must have one row per grid point");
    }

    const json& diags = field(j, "diagnostics");
    if (!diags.is_array()) throw InputError("model file: diagnostics must be an array");
    for (const json& d : diags) {
        FitDiagnostics fd;
        fd.z = decode_double(field(d, "z"));
        fd.iterations = get<std::size_t>(d, "iterations");
        fd.converged = get<bool>(d, "converged");
        fd.ess = decode_double(field(d, "ess"));
        fd.last_change = decode_double(field(d, "last_change"));
        fd.step_size = decode_double(field(d, "step_size"));
        fd.warnings = get<std::vector<std::string>>(d, "warnings");
        grid.diagnostics.push_back(std::move(fd));
    }
    model.dropped = get<std::size_t>(j, "dropped");
    model.warnings = get<std::vector<std::string>>(j, "warnings");
    return model;
}

void save_model(const std::string& path, const FittedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write model file '" + path + "'");
    write_model(out, model);
    if (!out) throw InputError("failed writing model file '" + path + "'");
}

FittedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file '" + path + "'");
    return read_model(in);
}

}  // namespace kshrl
