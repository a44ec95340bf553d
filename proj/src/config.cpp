#include "mmpr/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmpr/error.hpp"

namespace mmpr {

namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 4> kExperiments{{
    {Experiment::OdeConvergence, "ode-convergence"},
    {Experiment::SdeMoments, "sde-moments"},
    {Experiment::SdeParareal, "sde-parareal"},
    {Experiment::Selftest, "selftest"},
}};

[[noreturn]] void invalid(const std::string& msg) {
    throw Error(ErrorKind::InvalidArgument, msg);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        invalid("bad number for '" + std::string(key) + "': '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
    v = trim(v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        invalid("bad non-negative integer for '" + std::string(key) + "': '" + std::string(v) + "'");
    }
    return out;
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    while (!trim(v).empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_double(key, v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) invalid("empty list for '" + std::string(key) + "'");
    return out;
}

}  // namespace

std::string_view experiment_name(Experiment e) {
    for (const auto& [id, name] : kExperiments)
        if (id == e) return name;
    return "unknown";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (const auto& [id, n] : kExperiments)
        if (n == name) return id;
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    if (!(dt > 0.0)) invalid("dt must be positive");
    if (n_slabs < 1) invalid("n-slabs must be at least 1");
    if (!(t_final > 0.0)) invalid("t-final must be positive");
    if (!(inner_dt > 0.0)) invalid("inner-dt must be positive");
    if (inner_dt > t_final) invalid("inner-dt must not exceed t-final");
    if (particles < 2) invalid("particles must be at least 2");
    if (reps < 1) invalid("reps must be at least 1");
    if (workers < 1) invalid("workers must be at least 1");
    for (double s : sigma)
        if (s < 0.0) invalid("sigma must be non-negative");
    if (out_dir.empty()) invalid("out-dir must not be empty");
}

std::string format_number(double v) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "experiment") {
        const auto e = parse_experiment(value);
        if (!e) invalid("unknown experiment '" + std::string(value) + "'");
        cfg.experiment = *e;
    } else if (key == "alpha") {
        cfg.alpha = parse_double(key, value);
    } else if (key == "beta") {
        cfg.beta = parse_double(key, value);
    } else if (key == "delta") {
        cfg.delta = parse_double(key, value);
    } else if (key == "alpha-bar") {
        cfg.alpha_bar = parse_double(key, value);
    } else if (key == "zeta-perturb") {
        cfg.zeta_perturb = parse_double(key, value);
    } else if (key == "dt") {
        cfg.dt = parse_double(key, value);
    } else if (key == "x0") {
        cfg.x0 = parse_double(key, value);
    } else if (key == "y0") {
        cfg.y0 = parse_double(key, value);
    } else if (key == "n-slabs") {
        cfg.n_slabs = parse_unsigned(key, value);
    } else if (key == "iters") {
        cfg.iters = parse_unsigned(key, value);
    } else if (key == "t-final") {
        cfg.t_final = parse_double(key, value);
    } else if (key == "particles") {
        cfg.particles = parse_unsigned(key, value);
    } else if (key == "inner-dt") {
        cfg.inner_dt = parse_double(key, value);
    } else if (key == "sigma") {
        cfg.sigma = parse_list(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_unsigned(key, value);
    } else if (key == "reps") {
        cfg.reps = parse_unsigned(key, value);
    } else if (key == "workers") {
        cfg.workers = parse_unsigned(key, value);
    } else if (key == "out-dir") {
        cfg.out_dir = std::string(value);
    } else {
        invalid("unknown config key '" + std::string(key) + "'");
    }
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) invalid("config line " + std::to_string(line_no) + " has no '='");
        set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) invalid("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    auto put = [&out](std::string_view key, const std::string& value) {
        out.append(key).append(" = ").append(value).push_back('\n');
    };
    auto put_opt = [&](std::string_view key, const std::optional<double>& v) {
        if (v) put(key, format_number(*v));
    };
    put("experiment", std::string(experiment_name(cfg.experiment)));
    put_opt("alpha", cfg.alpha);
    put_opt("beta", cfg.beta);
    put_opt("delta", cfg.delta);
    put_opt("alpha-bar", cfg.alpha_bar);
    put("zeta-perturb", format_number(cfg.zeta_perturb));
    put("dt", format_number(cfg.dt));
    put("x0", format_number(cfg.x0));
    put("y0", format_number(cfg.y0));
    put("n-slabs", std::to_string(cfg.n_slabs));
    if (cfg.iters) put("iters", std::to_string(*cfg.iters));
    put("t-final", format_number(cfg.t_final));
    put("particles", std::to_string(cfg.particles));
    put("inner-dt", format_number(cfg.inner_dt));
    if (!cfg.sigma.empty()) {
        std::string list;
        for (std::size_t i = 0; i < cfg.sigma.size(); ++i) list += (i ? "," : "") + format_number(cfg.sigma[i]);
        put("sigma", list);
    }
    put("seed", std::to_string(cfg.seed));
    put("reps", std::to_string(cfg.reps));
    put("workers", std::to_string(cfg.workers));
    put("out-dir", cfg.out_dir);
    return out;
}

}  // namespace mmpr
