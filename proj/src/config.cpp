#include "kolmo/config.hpp"

#include "kolmo/error.hpp"
#include "kolmo/io.hpp"
#include "kolmo/problems.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace kolmo {

using nlohmann::json;

namespace {

void allow_only(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    require(obj.is_object(), where + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
        require(allowed.count(k) > 0, "unknown field '" + k + "' in " + where);
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::validation, std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
T get_required(const json& obj, const char* key, const std::string& where) {
    require(obj.contains(key), "missing field '" + std::string(key) + "' in " + where);
    return get_or<T>(obj, key, T{});
}

double positive(double v, const std::string& what) {
    require(std::isfinite(v) && v > 0.0, what + " must be positive");
    return v;
}

Eigen::MatrixXd parse_matrix(const json& rows, std::size_t n, const std::string& what) {
    require(rows.is_array() && rows.size() == n, what + " must have " + std::to_string(n) + " rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        require(rows[i].is_array() && rows[i].size() == n, what + " must be square");
        for (std::size_t j = 0; j < n; ++j) {
            require(rows[i][j].is_number(), what + " entries must be numbers");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
        }
    }
    return m;
}

VectorField parse_vector_field(const json& comps, std::size_t dim, const std::string& name) {
    require(comps.is_array() && comps.size() == dim, name + " needs one polynomial per component");
    std::vector<Polynomial> polys;
    for (const auto& c : comps) polys.push_back(parse_polynomial(c, dim));
    return polynomial_vector_field(std::move(polys), name);
}

ObjectiveSpec parse_objective(const json& j) {
    allow_only(j, "objective", {"kind", "value", "c", "center", "threshold", "width"});
    ObjectiveSpec s;
    const auto kind = get_required<std::string>(j, "kind", "objective");
    if (kind == "constant") s.kind = ObjectiveSpec::Kind::constant;
    else if (kind == "linear") s.kind = ObjectiveSpec::Kind::linear;
    else if (kind == "quadratic") s.kind = ObjectiveSpec::Kind::quadratic;
    else if (kind == "cosine") s.kind = ObjectiveSpec::Kind::cosine;
    else if (kind == "smoothed_indicator") s.kind = ObjectiveSpec::Kind::smoothed_indicator;
    else throw Error(ErrorKind::validation, "unknown objective kind '" + kind + "'");
    s.value = get_or<double>(j, "value", 1.0);
    s.c = get_or<std::vector<double>>(j, "c", {});
    s.center = get_or<std::vector<double>>(j, "center", {});
    s.threshold = get_or<double>(j, "threshold", 0.0);
    s.width = get_or<double>(j, "width", 0.1);
    return s;
}

BOperator parse_control_operator(const json& j, std::size_t dim) {
    allow_only(j, "control_operator", {"kind", "matrix", "terms", "norm"});
    const auto kind = get_required<std::string>(j, "kind", "control_operator");
    BOperator b;
    if (kind == "identity") {
        b = BOperator::identity();
    } else if (kind == "matrix") {
        require(j.contains("matrix"), "matrix control operator needs 'matrix'");
        b = BOperator::from_matrix(parse_matrix(j.at("matrix"), dim, "control matrix"));
    } else if (kind == "finite_rank") {
        require(j.contains("terms") && j.at("terms").is_array(), "finite_rank needs 'terms'");
        std::vector<BOperator::RankOne> terms;
        for (const auto& t : j.at("terms")) {
            allow_only(t, "finite_rank term", {"f", "g"});
            require(t.contains("f") && t.contains("g"), "finite_rank term needs 'f' and 'g'");
            terms.push_back({parse_vector_field(t.at("f"), dim, "f"), parse_vector_field(t.at("g"), dim, "g")});
        }
        b = BOperator::finite_rank(std::move(terms));
    } else {
        throw Error(ErrorKind::validation, "unknown control operator kind '" + kind + "'");
    }
    if (j.contains("norm")) b.declared_norm = positive(j.at("norm").get<double>(), "declared norm");
    return b;
}

PresetId parse_preset(const json& j) {
    const auto kind = get_required<std::string>(j, "kind", "preset");
    if (kind == "ou") {
        allow_only(j, "ou preset", {"kind", "dim", "decay", "noise"});
        OuPreset p;
        p.dim = get_or<std::size_t>(j, "dim", 1);
        p.decay = get_or<std::vector<double>>(j, "decay", {});
        p.noise = get_or<std::vector<double>>(j, "noise", {});
        return p;
    }
    if (kind == "gradient_system") {
        allow_only(j, "gradient_system preset", {"kind", "dim", "potential", "strength", "decay"});
        GradientSystemPreset p;
        p.dim = get_or<std::size_t>(j, "dim", 1);
        const auto pot = get_or<std::string>(j, "potential", "quartic");
        if (pot == "quartic") p.potential = PotentialKind::quartic;
        else if (pot == "double_well") p.potential = PotentialKind::double_well;
        else throw Error(ErrorKind::validation, "invalid potential '" + pot + "'");
        p.strength = get_or<double>(j, "strength", 1.0);
        p.decay = get_or<std::vector<double>>(j, "decay", {});
        return p;
    }
    if (kind == "reaction_diffusion") {
        allow_only(j, "reaction_diffusion preset", {"kind", "grid_points", "reaction"});
        ReactionDiffusionPreset p;
        p.grid_points = get_or<std::size_t>(j, "grid_points", 3);
        p.reaction = get_or<std::vector<double>>(j, "reaction", {0.0, 0.0, 0.0, 1.0});
        return p;
    }
    throw Error(ErrorKind::validation, "unknown preset kind '" + kind + "'");
}

MeasureSpec parse_measure(const json& j, std::size_t dim) {
    allow_only(j, "measure", {"kind", "variances", "base_variances", "potential", "potential_lower_bound"});
    const auto kind = get_required<std::string>(j, "kind", "measure");
    MeasureSpec m;
    if (kind == "gaussian") {
        m = MeasureSpec::gaussian(get_required<std::vector<double>>(j, "variances", "measure"));
        m.cache_key = "gaussian";
    } else if (kind == "gibbs") {
        require(j.contains("potential"), "gibbs measure needs 'potential'");
        const Polynomial u = parse_polynomial(j.at("potential"), dim);
        m = MeasureSpec::gibbs(get_required<std::vector<double>>(j, "base_variances", "measure"),
                               u.as_field("inline potential"), get_or<double>(j, "potential_lower_bound", 0.0));
        m.cache_key = "gibbs-inline:" + content_hash(j.at("potential").dump());
    } else {
        throw Error(ErrorKind::validation, "unknown measure kind '" + kind + "'");
    }
    require(m.dim() == dim, "measure dimension differs from problem dimension");
    return m;
}

ProblemSpec parse_inline(const json& j) {
    allow_only(j, "inline problem", {"dim", "linear_drift", "nonlinear_drift", "noise", "measure", "symmetric"});
    const auto dim = get_required<std::size_t>(j, "dim", "inline problem");
    require(dim >= 1, "inline problem dimension must be at least 1");
    ProblemSpec p;
    p.name = "inline";
    p.dim = dim;
    require(j.contains("linear_drift"), "inline problem needs 'linear_drift'");
    p.linear_drift = parse_matrix(j.at("linear_drift"), dim, "linear_drift");
    if (j.contains("nonlinear_drift")) p.nonlinear_drift = parse_vector_field(j.at("nonlinear_drift"), dim, "F");
    p.noise = get_required<std::vector<double>>(j, "noise", "inline problem");
    require(j.contains("measure"), "inline problem needs 'measure'");
    p.measure = parse_measure(j.at("measure"), dim);
    p.symmetric = get_or<bool>(j, "symmetric", false);
    return p;
}

ProblemSpec parse_problem(const json& j) {
    allow_only(j, "problem", {"preset", "inline", "rho", "horizon", "objective", "control_operator"});
    require(j.contains("preset") != j.contains("inline"), "problem needs exactly one of 'preset' or 'inline'");
    const double rho = positive(get_required<double>(j, "rho", "problem"), "rho");
    const double horizon = positive(get_required<double>(j, "horizon", "problem"), "horizon");
    require(j.contains("objective"), "problem needs 'objective'");
    const ObjectiveSpec obj = parse_objective(j.at("objective"));

    if (j.contains("preset")) {
        const PresetId id = parse_preset(j.at("preset"));
        const std::size_t dim = std::visit(
            [](const auto& p) -> std::size_t {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, ReactionDiffusionPreset>) return p.grid_points;
                else return p.dim;
            },
            id);
        BOperator b = j.contains("control_operator") ? parse_control_operator(j.at("control_operator"), dim)
                                                     : BOperator::identity();
        return build_preset(id, rho, horizon, obj, std::move(b));
    }
    ProblemSpec p = parse_inline(j.at("inline"));
    p.rho = rho;
    p.horizon = horizon;
    p.objective = make_objective(obj, p.dim);
    if (j.contains("control_operator")) p.control = parse_control_operator(j.at("control_operator"), p.dim);
    p.validate();
    return p;
}

}  // namespace

Polynomial parse_polynomial(const json& terms, std::size_t dim) {
    require(terms.is_array(), "polynomial must be an array of terms");
    std::vector<Polynomial::Term> out;
    for (const auto& t : terms) {
        allow_only(t, "polynomial term", {"coeff", "powers"});
        Polynomial::Term term;
        term.coeff = get_required<double>(t, "coeff", "polynomial term");
        term.powers = get_required<std::vector<int>>(t, "powers", "polynomial term");
        require(term.powers.size() == dim, "polynomial term needs one exponent per dimension");
        out.push_back(std::move(term));
    }
    return Polynomial(dim, std::move(out));
}

RunConfig parse_config(const json& doc) {
    allow_only(doc, "config", {"version", "problem", "discretization", "optimize", "control", "verify", "output_dir"});
    require(doc.contains("version"), "config needs 'version'");
    require(doc.at("version").is_number_integer() && doc.at("version").get<int>() == kConfigVersion,
            "unsupported config version (expected " + std::to_string(kConfigVersion) + ")");
    RunConfig cfg;
    cfg.source = doc;
    require(doc.contains("problem"), "config needs 'problem'");
    cfg.problem = parse_problem(doc.at("problem"));

    if (doc.contains("discretization")) {
        const json& d = doc.at("discretization");
        allow_only(d, "discretization", {"max_degree", "quad_level", "steps", "theta", "rescale", "assembly"});
        auto& out = cfg.discretization;
        out.max_degree = get_or<int>(d, "max_degree", 8);
        out.quad_level = get_or<int>(d, "quad_level", 0);
        out.steps = get_or<std::size_t>(d, "steps", 0);
        out.theta = get_or<double>(d, "theta", 0.5);
        out.rescale = get_or<bool>(d, "rescale", false);
        const auto assembly = get_or<std::string>(d, "assembly", "direct");
        if (assembly == "direct") out.assembly = Assembly::direct;
        else if (assembly == "dirichlet_form") out.assembly = Assembly::dirichlet_form;
        else throw Error(ErrorKind::validation, "unknown assembly '" + assembly + "'");
        require(out.max_degree >= 1, "max_degree must be positive");
        require(out.quad_level == 0 || out.quad_level >= 2, "quad_level must be at least 2");
        require(out.theta >= 0.5 && out.theta <= 1.0, "theta must lie in [1/2, 1]");
    }

    if (doc.contains("optimize")) {
        const json& o = doc.at("optimize");
        allow_only(o, "optimize", {"method", "tol", "max_iter", "multistart"});
        cfg.optimize.method = parse_method(get_or<std::string>(o, "method", "projected_gradient"));
        cfg.optimize.tol = positive(get_or<double>(o, "tol", 1e-6), "tol");
        cfg.optimize.max_iter = get_or<std::size_t>(o, "max_iter", 200);
        cfg.optimize.multistart = get_or<std::size_t>(o, "multistart", 1);
        require(cfg.optimize.max_iter >= 1 && cfg.optimize.multistart >= 1,
                "max_iter and multistart must be positive");
    }

    if (doc.contains("control")) {
        const json& c = doc.at("control");
        allow_only(c, "control", {"kind", "value", "interpolation"});
        const auto kind = get_or<std::string>(c, "kind", "zero");
        if (kind == "zero") cfg.control.kind = ControlChoice::Kind::zero;
        else if (kind == "constant") cfg.control.kind = ControlChoice::Kind::constant;
        else if (kind == "optimized") cfg.control.kind = ControlChoice::Kind::optimized;
        else throw Error(ErrorKind::validation, "unknown control kind '" + kind + "'");
        cfg.control.value = get_or<std::vector<double>>(c, "value", {});
        if (cfg.control.kind == ControlChoice::Kind::constant) {
            require(cfg.control.value.size() == cfg.problem.dim, "constant control needs one value per dimension");
        }
        const auto interp = get_or<std::string>(c, "interpolation", "nearest_node");
        if (interp == "nearest_node") cfg.control.interpolation = ControlPolicy::Interpolation::nearest_node;
        else if (interp == "polynomial_fit") cfg.control.interpolation = ControlPolicy::Interpolation::polynomial_fit;
        else throw Error(ErrorKind::validation, "unknown interpolation '" + interp + "'");
    }

    if (doc.contains("verify")) {
        const json& v = doc.at("verify");
        allow_only(v, "verify", {"n_paths", "dt", "seed", "probes", "mode", "x0", "dump_paths"});
        auto& out = cfg.verify;
        out.n_paths = get_or<std::size_t>(v, "n_paths", 10'000);
        require(out.n_paths >= 1, "n_paths must be positive");
        out.dt = positive(get_or<double>(v, "dt", 1e-3), "dt");
        out.seed = get_or<std::uint64_t>(v, "seed", 0);
        out.probes = get_or<std::vector<std::vector<double>>>(v, "probes", {});
        for (const auto& p : out.probes) require(p.size() == cfg.problem.dim, "probe has the wrong dimension");
        out.mode = parse_mode(get_or<std::string>(v, "mode", "girsanov"));
        if (v.contains("x0")) {
            if (v.at("x0").is_string()) {
                require(v.at("x0").get<std::string>() == "measure", "x0 must be \"measure\" or a point");
            } else {
                auto x = get_or<std::vector<double>>(v, "x0", {});
                require(x.size() == cfg.problem.dim, "x0 has the wrong dimension");
                out.x0 = InitialLaw::fixed(std::move(x));
            }
        }
        out.dump_paths = get_or<bool>(v, "dump_paths", false);
    }

    cfg.output_dir = get_or<std::string>(doc, "output_dir", "out");
    if (cfg.discretization.assembly == Assembly::dirichlet_form) {
        require(cfg.problem.symmetric, "Dirichlet-form assembly needs a symmetric problem");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot read config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace kolmo
