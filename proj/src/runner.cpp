#include "tlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "tlab/dolgopyat.hpp"
#include "tlab/io.hpp"

namespace tlab {

using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::vector<std::string> kPipelines = {"validate", "spectrum", "uni",  "decay",
                                             "l2",       "resolvent", "federer",
                                             "correlate"};

std::string tag_double(double x) {
    std::string s = fmt_double(x);
    for (auto& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
        if (c == '+') c = ' ';
    }
    std::erase(s, ' ');
    return s;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

void require_keys(const json& cfg, const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
    for (const auto& [key, _] : cfg.items())
        if (!allowed.count(key))
            throw InvalidParameter("unknown config key: " + key);
    for (const auto& key : required)
        if (!cfg.contains(key))
            throw InvalidParameter("missing config key: " + key);
}

ExpandingSystem system_from(const json& cfg) {
    if (!cfg.contains("system")) return make_gauss_system();
    return load_system(cfg.at("system"));
}

TruncationPolicy trunc_from(const json& cfg) {
    TruncationPolicy p = TruncationPolicy::all();
    if (cfg.contains("truncation")) {
        const auto& t = cfg.at("truncation");
        for (const auto& [key, _] : t.items())
            if (key != "cutoff" && key != "tolerance")
                throw InvalidParameter("unknown truncation key: " + key);
        if (t.contains("tolerance")) p.tolerance = t.at("tolerance").get<double>();
        if (t.contains("cutoff") && !t.at("cutoff").is_string())
            p.cutoff = t.at("cutoff").get<std::uint64_t>();
    }
    return p;
}

std::uint64_t required_seed(const json& cfg) {
    if (!cfg.contains("seed"))
        throw InvalidParameter("randomized pipeline requires an explicit seed");
    return cfg.at("seed").get<std::uint64_t>();
}

std::vector<double> list_of(const json& v) {
    if (v.is_number()) return {v.get<double>()};
    return v.get<std::vector<double>>();
}

FlowObservable observable_by_name(const std::string& name) {
    if (name == "one") return [](double, double) { return 1.0; };
    if (name == "coord") return [](double x, double) { return x; };
    if (name == "sin2pix") return [](double x, double) { return std::sin(2.0 * kPi * x); };
    if (name == "bump")
        return [](double x, double u) {
            const double s = std::sin(kPi * x);
            return s * s * std::exp(-(u - 1.0) * (u - 1.0));
        };
    throw InvalidParameter("unknown observable: " + name);
}

struct Experiment {
    std::string pipeline;
    json params;
    json metrics;
    std::vector<std::string> outputs;
    bool pass = true;
};

struct Context {
    std::filesystem::path out;
    std::vector<Experiment> experiments;

    void emit_json(Experiment& e, const std::string& name, const json& doc) {
        write_json_atomic(out / name, doc);
        e.outputs.push_back(name);
    }
    void emit_text(Experiment& e, const std::string& name, const std::string& text) {
        write_text_atomic(out / name, text);
        e.outputs.push_back(name);
    }
};

// --- pipelines -----------------------------------------------------------------

void run_validate(const json& cfg, Context& ctx) {
    require_keys(cfg, {"system", "sample_count", "word_depth", "max_digits", "seed", "out_dir"},
                 {"sample_count"});
    const auto sys = system_from(cfg);
    const auto rep = validate_system(sys, cfg.at("sample_count").get<int>(),
                                     cfg.value("word_depth", 3), cfg.value("max_digits", 40));
    Experiment e;
    e.pipeline = "validate";
    e.params = {{"system", sys.name()}, {"sample_count", rep.sample_count}};
    e.metrics = {{"rho_hat_estimate", rep.rho_hat_estimate}, {"k_hat", rep.k_hat}};
    e.pass = rep.all_passed();
    ctx.emit_json(e, "validate_" + sys.name() + ".json", to_json(rep));
    ctx.experiments.push_back(std::move(e));
}

void run_spectrum(const json& cfg, Context& ctx) {
    require_keys(cfg, {"system", "grid_n", "sigma", "tol", "truncation", "seed", "out_dir"},
                 {"sigma"});
    const auto sys = system_from(cfg);
    const auto grid = build_grid(cfg.value("grid_n", 64));
    const auto trunc = trunc_from(cfg);
    EigenSolveOptions opt;
    opt.tol = cfg.value("tol", 1e-10);

    for (double sigma : list_of(cfg.at("sigma"))) {
        const auto spec = leading_eigendata(sys, sigma, grid, trunc, opt);
        Experiment e;
        e.pipeline = "spectrum";
        e.params = {{"system", sys.name()}, {"sigma", sigma}, {"grid_n", grid->order()}};
        e.metrics = {{"lambda", spec.lambda}, {"gap", spec.gap}, {"residual", spec.residual}};
        e.pass = spec.residual <= opt.tol * std::max(1.0, spec.lambda);
        const std::string tag = sys.name() + "_sigma" + tag_double(sigma);
        ctx.emit_json(e, "spectrum_" + tag + ".json", to_json(spec));
        std::ostringstream csv;
        write_csv(spec.eigenfunction, csv);
        ctx.emit_text(e, "eigenfunction_" + tag + ".csv", csv.str());
        ctx.experiments.push_back(std::move(e));
    }
}

void run_uni(const json& cfg, Context& ctx) {
    require_keys(cfg, {"system", "n", "n_check_to", "candidates", "seed", "out_dir"},
                 {"n"});
    const auto sys = system_from(cfg);
    const int n = cfg.at("n").get<int>();
    std::vector<std::pair<std::vector<int>, std::vector<int>>> candidates;
    if (cfg.contains("candidates"))
        for (const auto& pair : cfg.at("candidates"))
            candidates.push_back({pair.at(0).get<std::vector<int>>(),
                                  pair.at(1).get<std::vector<int>>()});
    const auto cert = uni_certificate(sys, n, candidates);

    Experiment e;
    e.pipeline = "uni";
    e.params = {{"system", sys.name()}, {"n", n}};
    e.metrics = {{"D", cert.D}, {"sup_psi", cert.sup_psi}};
    e.pass = cert.certified;
    const std::string tag = sys.name() + "_n" + std::to_string(n);
    ctx.emit_json(e, "uni_" + tag + ".json", to_json(cert));

    CsvBuilder csv({"n", "D", "sup_psi"});
    csv.row({double(n), cert.D, cert.sup_psi});
    if (cfg.contains("n_check_to")) {
        for (int m = n + 1; m <= cfg.at("n_check_to").get<int>(); ++m) {
            const auto c = uni_certificate(sys, m, {});
            csv.row({double(m), c.D, c.sup_psi});
        }
    }
    ctx.emit_text(e, "uni_" + tag + ".csv", csv.str());
    ctx.experiments.push_back(std::move(e));
}

void run_decay(const json& cfg, Context& ctx) {
    require_keys(cfg,
                 {"system", "sigma", "t_list", "n_max", "sample_count", "seed", "cert_n",
                  "grid_n", "truncation", "out_dir"},
                 {"t_list", "seed"});
    const auto sys = system_from(cfg);
    const double sigma = cfg.value("sigma", 0.0);
    const std::uint64_t seed = required_seed(cfg);
    const int n_max = cfg.value("n_max", 24);
    const int samples = cfg.value("sample_count", 32);
    const int cert_n = cfg.value("cert_n", 10);
    const auto trunc = trunc_from(cfg);
    const auto cert = uni_certificate(
        sys, cert_n, sys.has_gauss_tail() ? spread_candidates(cert_n)
                                          : std::vector<std::pair<std::vector<int>,
                                                                  std::vector<int>>>{});

    for (double t : list_of(cfg.at("t_list"))) {
        const int order = cfg.contains("grid_n") ? cfg.at("grid_n").get<int>()
                                                 : default_grid_order(t);
        const auto grid = build_grid(order);
        const auto rep = norm_decay(sys, sigma, t, n_max, samples, seed, cert, grid, trunc);
        Experiment e;
        e.pipeline = "decay";
        e.params = {{"system", sys.name()}, {"sigma", sigma}, {"t", t},
                    {"seed", seed},        {"grid_n", order}};
        e.metrics = {{"gamma", rep.gamma}, {"A", rep.A}, {"fit_residual", rep.fit_residual}};
        e.pass = rep.gamma < 1.0;
        const std::string tag = sys.name() + "_sigma" + tag_double(sigma) + "_t" +
                                tag_double(t) + "_seed" + std::to_string(seed);
        ctx.emit_json(e, "decay_" + tag + ".json", to_json(rep));
        CsvBuilder csv({"n", "lower", "upper"});
        for (const auto& row : rep.rows) csv.row({double(row.n), row.lower, row.upper});
        ctx.emit_text(e, "decay_" + tag + ".csv", csv.str());
        ctx.experiments.push_back(std::move(e));
    }
}

void run_l2(const json& cfg, Context& ctx) {
    require_keys(cfg,
                 {"system", "sigma", "t", "n", "m_max", "eta", "delta", "Delta",
                  "grid_n", "truncation", "seed", "out_dir"},
                 {"t", "n"});
    const auto sys = system_from(cfg);
    const double sigma = cfg.value("sigma", 0.0);
    const double t = cfg.at("t").get<double>();
    const int n = cfg.at("n").get<int>();
    const int m_max = cfg.value("m_max", 8);
    const auto trunc = trunc_from(cfg);
    CancellationParams params;
    params.eta = cfg.value("eta", 0.9);
    if (cfg.contains("delta")) params.delta = cfg.at("delta").get<double>();
    if (cfg.contains("Delta")) params.Delta = cfg.at("Delta").get<double>();

    std::vector<int> orders;
    if (cfg.contains("grid_n")) {
        if (cfg.at("grid_n").is_array())
            orders = cfg.at("grid_n").get<std::vector<int>>();
        else
            orders = {cfg.at("grid_n").get<int>()};
    } else {
        orders = {default_grid_order(t)};
    }

    for (int order : orders) {
        const auto grid = build_grid(order);
        const auto spec = leading_eigendata(sys, sigma, grid, trunc);
        const auto f = GridFunction::sample(
            grid, [t](double x) { return std::exp(Complex(0.0, t * x)); });
        const auto rep = l2_contraction(sys, sigma, t, n, m_max, f, spec, params);
        Experiment e;
        e.pipeline = "l2";
        e.params = {{"system", sys.name()}, {"sigma", sigma}, {"t", t},
                    {"n", n},               {"grid_n", order}};
        e.metrics = {{"beta", rep.beta}, {"contracting", rep.contracting}};
        e.pass = rep.contracting;
        const std::string tag = sys.name() + "_sigma" + tag_double(sigma) + "_t" +
                                tag_double(t) + "_n" + std::to_string(n) + "_N" +
                                std::to_string(order);
        ctx.emit_json(e, "l2_" + tag + ".json", to_json(rep));
        CsvBuilder csv({"m", "integral", "ratio"});
        for (std::size_t m = 0; m < rep.integrals.size(); ++m)
            csv.row({double(m), rep.integrals[m], m == 0 ? 1.0 : rep.ratios[m - 1]});
        ctx.emit_text(e, "l2_" + tag + ".csv", csv.str());
        ctx.experiments.push_back(std::move(e));
    }
}

void run_resolvent(const json& cfg, Context& ctx) {
    require_keys(cfg,
                 {"system", "sigma", "t_list", "alpha", "sample_count", "seed",
                  "grid_n", "out_dir"},
                 {"t_list", "seed"});
    const auto sys = system_from(cfg);
    const double sigma = cfg.value("sigma", 0.0);
    const double alpha = cfg.value("alpha", 0.9);
    const std::uint64_t seed = required_seed(cfg);
    std::optional<int> grid_n;
    if (cfg.contains("grid_n")) grid_n = cfg.at("grid_n").get<int>();
    const auto rep = resolvent_bound(sys, sigma, list_of(cfg.at("t_list")), alpha,
                                     cfg.value("sample_count", 16), seed, grid_n);
    Experiment e;
    e.pipeline = "resolvent";
    e.params = {{"system", sys.name()}, {"sigma", sigma}, {"alpha", alpha}, {"seed", seed}};
    e.metrics = {{"exponent", rep.exponent}};
    e.pass = rep.pass;
    const std::string tag = sys.name() + "_sigma" + tag_double(sigma) + "_seed" +
                            std::to_string(seed);
    ctx.emit_json(e, "resolvent_" + tag + ".json", to_json(rep));
    CsvBuilder csv({"t", "estimate", "excluded"});
    for (const auto& row : rep.rows)
        csv.row({row.t, row.estimate, row.excluded ? 1.0 : 0.0});
    ctx.emit_text(e, "resolvent_" + tag + ".csv", csv.str());
    ctx.experiments.push_back(std::move(e));
}

void run_federer(const json& cfg, Context& ctx) {
    require_keys(cfg, {"sigma", "n_max", "cross_check_n", "grid_n", "seed", "out_dir"},
                 {"sigma"});
    const double sigma = cfg.at("sigma").get<double>();
    const int n_max = cfg.value("n_max", 20);
    const auto table = federer_table(sigma, n_max);

    Experiment e;
    e.pipeline = "federer";
    e.params = {{"sigma", sigma}, {"n_max", n_max}};
    double max_cross_err = 0.0;
    const int cross_n = cfg.value("cross_check_n", 8);
    if (cross_n > 0) {
        const auto sys = make_doubling_counterexample();
        const auto grid = build_grid(cfg.value("grid_n", 32));
        const auto spec = leading_eigendata(sys, sigma, grid, TruncationPolicy::all());
        for (int n = 1; n <= std::min(cross_n, n_max); ++n) {
            std::vector<int> left(static_cast<std::size_t>(n), 1);
            left[0] = 0;  // digits 0,1,...,1: the 2^-n interval left of 1/2
            std::vector<int> right(static_cast<std::size_t>(n), 0);
            right[0] = 1;
            const double gl = cylinder_mass(sys, spec, left);
            const double gr = cylinder_mass(sys, spec, right);
            const auto& row = table.rows[static_cast<std::size_t>(n - 1)];
            max_cross_err = std::max({max_cross_err, std::abs(gl - row.left),
                                      std::abs(gr - row.right)});
        }
        e.metrics["cross_check_error"] = max_cross_err;
        e.pass = max_cross_err <= 1e-8;
    }
    e.metrics["log2_ratio_slope"] = sigma;
    const std::string tag = "sigma" + tag_double(sigma);
    ctx.emit_json(e, "federer_" + tag + ".json", to_json(table));
    CsvBuilder csv({"n", "left", "right", "ratio", "log2_ratio"});
    for (const auto& row : table.rows)
        csv.row({double(row.n), row.left, row.right, row.ratio, row.log2_ratio});
    ctx.emit_text(e, "federer_" + tag + ".csv", csv.str());
    ctx.experiments.push_back(std::move(e));
}

void run_correlate(const json& cfg, Context& ctx) {
    require_keys(cfg,
                 {"system", "observable_f", "observable_g", "time_grid", "sample_count",
                  "grid_n", "seed", "out_dir"},
                 {"time_grid", "seed"});
    const auto sys = system_from(cfg);
    const std::uint64_t seed = required_seed(cfg);
    const auto grid = build_grid(cfg.value("grid_n", 64));
    const auto spec0 = leading_eigendata(sys, 0.0, grid, TruncationPolicy::all());
    const auto F = observable_by_name(cfg.value("observable_f", "bump"));
    const auto G = observable_by_name(cfg.value("observable_g", "bump"));
    const auto rep = semiflow_correlation(sys, spec0, F, G,
                                          cfg.at("time_grid").get<std::vector<double>>(),
                                          cfg.value("sample_count", 200000), seed);
    Experiment e;
    e.pipeline = "correlate";
    e.params = {{"system", sys.name()},
                {"seed", seed},
                {"sample_count", rep.sample_count},
                {"observable_f", cfg.value("observable_f", "bump")},
                {"observable_g", cfg.value("observable_g", "bump")}};
    e.metrics = {{"rate", rep.rate}, {"rate_lo", rep.rate_lo}, {"rate_hi", rep.rate_hi}};
    e.pass = true;
    const std::string tag = sys.name() + "_seed" + std::to_string(seed);
    ctx.emit_json(e, "correlate_" + tag + ".json", to_json(rep));
    CsvBuilder csv({"time", "covariance", "std_error"});
    for (const auto& row : rep.rows) csv.row({row.time, row.covariance, row.std_error});
    ctx.emit_text(e, "correlate_" + tag + ".csv", csv.str());
    ctx.experiments.push_back(std::move(e));
}

}  // namespace

const std::vector<std::string>& pipeline_names() { return kPipelines; }

int run_pipeline_json(const std::string& pipeline, json cfg,
                      const std::filesystem::path& out_dir) {
    const std::string started = iso_now();
    try {
        if (std::find(kPipelines.begin(), kPipelines.end(), pipeline) == kPipelines.end()) {
            std::cerr << "unknown pipeline: " << pipeline << "\n";
            return kExitError;
        }
        if (!cfg.is_object()) throw InvalidParameter("config must be a JSON object");

        Context ctx;
        ctx.out = out_dir;
        std::filesystem::create_directories(ctx.out);

        if (pipeline == "validate") run_validate(cfg, ctx);
        else if (pipeline == "spectrum") run_spectrum(cfg, ctx);
        else if (pipeline == "uni") run_uni(cfg, ctx);
        else if (pipeline == "decay") run_decay(cfg, ctx);
        else if (pipeline == "l2") run_l2(cfg, ctx);
        else if (pipeline == "resolvent") run_resolvent(cfg, ctx);
        else if (pipeline == "federer") run_federer(cfg, ctx);
        else if (pipeline == "correlate") run_correlate(cfg, ctx);

        json manifest{{"schema_version", 1},
                      {"version", kVersion},
                      {"pipeline", pipeline},
                      {"config_hash", fnv1a_hash(cfg.dump())},
                      {"started", started},
                      {"finished", iso_now()}};
        json exps = json::array();
        for (const auto& e : ctx.experiments)
            exps.push_back({{"pipeline", e.pipeline},
                            {"params", e.params},
                            {"metrics", e.metrics},
                            {"outputs", e.outputs},
                            {"pass", e.pass}});
        manifest["experiments"] = exps;
        write_json_atomic(ctx.out / "manifest.json", manifest);
        return kExitOk;
    } catch (const OutOfScope& ex) {
        std::cerr << "assumption violated: " << ex.what() << "\n";
        return kExitAssumption;
    } catch (const DivergentSum& ex) {
        std::cerr << "assumption violated: " << ex.what() << "\n";
        return kExitAssumption;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitError;
    }
}

int run_pipeline(const std::string& pipeline, const RunOptions& opt) {
    json cfg;
    {
        std::ifstream is(opt.config_path);
        if (!is) {
            std::cerr << "error: cannot open config " << opt.config_path << "\n";
            return kExitError;
        }
        try {
            cfg = json::parse(is);
        } catch (const json::parse_error& ex) {
            std::cerr << "error: malformed config: " << ex.what() << "\n";
            return kExitError;
        }
    }
    if (!cfg.is_object()) {
        std::cerr << "error: config must be a JSON object\n";
        return kExitError;
    }
    for (const auto& [key, value] : opt.overrides) {
        try {
            cfg[key] = json::parse(value);
        } catch (const json::parse_error&) {
            cfg[key] = value;
        }
    }
    if (opt.seed) cfg["seed"] = *opt.seed;
    std::filesystem::path out = opt.out_dir
                                    ? *opt.out_dir
                                    : std::filesystem::path(cfg.value("out_dir", "out"));
    cfg.erase("out_dir");
    return run_pipeline_json(pipeline, std::move(cfg), out);
}

int summarize(const std::filesystem::path& manifest_path) {
    json manifest;
    {
        std::ifstream is(manifest_path);
        if (!is) {
            std::cerr << "error: cannot open manifest " << manifest_path << "\n";
            return kExitError;
        }
        try {
            manifest = json::parse(is);
        } catch (const json::parse_error& ex) {
            std::cerr << "error: malformed manifest: " << ex.what() << "\n";
            return kExitError;
        }
    }
    const auto dir = manifest_path.parent_path();
    const auto& exps = manifest.value("experiments", json::array());
    if (exps.empty()) {
        std::cout << "0 experiments\n";
        return kExitOk;
    }
    int rc = kExitOk;
    for (const auto& e : exps) {
        for (const auto& out : e.value("outputs", json::array())) {
            if (!std::filesystem::exists(dir / out.get<std::string>())) {
                std::cerr << "error: missing output " << out.get<std::string>() << "\n";
                rc = kExitError;
            }
        }
        std::ostringstream line;
        line << e.value("pipeline", "?");
        const json params = e.value("params", json::object());
        const json metrics = e.value("metrics", json::object());
        for (const auto& [k, v] : params.items())
            line << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
        for (const auto& [k, v] : metrics.items()) {
            if (k == "lambda") {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.9f", v.get<double>());
                line << " lambda=" << buf;
            } else {
                line << ' ' << k << '=' << v.dump();
            }
        }
        line << (e.value("pass", false) ? " PASS" : " FAIL");
        std::cout << line.str() << "\n";
    }
    return rc;
}

}  // namespace tlab
