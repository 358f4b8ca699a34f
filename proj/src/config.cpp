#include "ptychodr/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ptychodr/errors.hpp"

namespace ptychodr {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strips a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

TomlValue parse_scalar(const std::string& text, int line_no) {
    TomlValue v;
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError("toml: empty value on line " + std::to_string(line_no));
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw ConfigError("toml: unterminated string on line " + std::to_string(line_no));
        v.kind = TomlValue::Kind::string;
        v.str = t.substr(1, t.size() - 2);
        return v;
    }
    if (t == "true" || t == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.boolean = t == "true";
        return v;
    }
    try {
        std::size_t used = 0;
        v.number = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        v.kind = TomlValue::Kind::number;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("toml: cannot parse value '" + t + "' on line " +
                          std::to_string(line_no));
    }
}

TomlValue parse_value(const std::string& text, int line_no) {
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw ConfigError("toml: unterminated array on line " + std::to_string(line_no));
        TomlValue v;
        v.kind = TomlValue::Kind::array;
        std::string inner = t.substr(1, t.size() - 2);
        std::string item;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(item).empty()) v.items.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        if (!trim(item).empty()) v.items.push_back(parse_scalar(item, line_no));
        return v;
    }
    return parse_scalar(t, line_no);
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("toml: bad section header on line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("toml: empty section name on line " + std::to_string(line_no));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("toml: expected key = value on line " + std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("toml: empty key on line " + std::to_string(line_no));
        const std::string full = section.empty() ? key : section + "." + key;
        table.values_[full] = parse_value(line.substr(eq + 1), line_no);
    }
    return table;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::string)
        throw ConfigError("config key '" + key + "' must be a string");
    return it->second.str;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::number)
        throw ConfigError("config key '" + key + "' must be a number");
    return it->second.number;
}

std::int64_t TomlTable::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::number)
        throw ConfigError("config key '" + key + "' must be an integer");
    const double v = it->second.number;
    if (v != std::floor(v))
        throw ConfigError("config key '" + key + "' must be an integer");
    return static_cast<std::int64_t>(v);
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::boolean)
        throw ConfigError("config key '" + key + "' must be true or false");
    return it->second.boolean;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return {};
    if (it->second.kind != TomlValue::Kind::array)
        throw ConfigError("config key '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& item : it->second.items) {
        if (item.kind != TomlValue::Kind::number)
            throw ConfigError("config key '" + key + "' must hold numbers");
        out.push_back(item.number);
    }
    return out;
}

void ExperimentConfig::apply_scale_preset(const std::string& name) {
    scale = name;
    if (name == "desk") {
        object.n = 64;
        m = 16;
        tau = 8;
        perturb_range = 2;
    } else if (name == "paper") {
        object.n = 256;
        m = 60;
        // tau must divide n; 32 keeps the overlap at ~47% next to m/2 = 30
        tau = 32;
        perturb_range = 4;
    } else {
        throw ConfigError("unknown scale preset: " + name + " (want desk or paper)");
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_toml(TomlTable::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_toml(const TomlTable& t) {
    ExperimentConfig c;
    c.apply_scale_preset(t.get_string("scale", "desk"));
    c.seed = static_cast<std::uint64_t>(t.get_int("seed", 1));

    const std::string object_kind = t.get_string("object.kind", "rpp");
    if (object_kind == "rpp")
        c.object.kind = PhantomSpec::Kind::rpp;
    else if (object_kind == "salted-rpp")
        c.object.kind = PhantomSpec::Kind::salted_rpp;
    else if (object_kind == "shepp-logan")
        c.object.kind = PhantomSpec::Kind::shepp_logan;
    else if (object_kind == "cib")
        c.object.kind = PhantomSpec::Kind::cib;
    else if (object_kind == "cib-synthetic")
        c.object.kind = PhantomSpec::Kind::cib_synthetic;
    else
        throw ConfigError("unknown object.kind: " + object_kind);
    c.object.n = static_cast<int>(t.get_int("object.n", c.object.n));
    c.object.phase_range = t.get_double("object.phase_range", c.object.phase_range);
    c.object.real_image = t.get_string("object.real_image", "");
    c.object.imag_image = t.get_string("object.imag_image", "");
    c.object.salt_probability = t.get_double("object.salt_probability", c.object.salt_probability);
    c.object.salt_value = t.get_double("object.salt_value", c.object.salt_value);
    c.magnitude_scale = t.get_double("object.magnitude_scale", 1.0);
    c.bright_frame = static_cast<int>(t.get_int("object.bright_frame", 0));
    c.bright_value = t.get_double("object.bright_value", 0.0);

    const std::string probe_kind = t.get_string("probe.kind", "iid");
    if (probe_kind == "iid")
        c.probe_kind = ProbeKind::iid_phase;
    else if (probe_kind == "correlated")
        c.probe_kind = ProbeKind::correlated;
    else
        throw ConfigError("unknown probe.kind: " + probe_kind);
    c.m = static_cast<int>(t.get_int("probe.m", c.m));
    c.probe_correlation = t.get_double("probe.c", c.probe_correlation);

    const std::string scan_kind = t.get_string("scan.kind", "full-rank");
    if (scan_kind == "two-pattern") {
        c.measurement = MeasurementKind::two_pattern;
    } else if (scan_kind == "raster") {
        c.scan_kind = PerturbKind::none;
    } else if (scan_kind == "rank-one") {
        c.scan_kind = PerturbKind::rank_one;
    } else if (scan_kind == "full-rank") {
        c.scan_kind = PerturbKind::full_rank;
    } else {
        throw ConfigError("unknown scan.kind: " + scan_kind);
    }
    c.tau = static_cast<int>(t.get_int("scan.tau", c.tau));
    c.perturb_range = static_cast<int>(t.get_int("scan.perturb_range", c.perturb_range));

    const std::string noise_kind = t.get_string("noise.kind", "none");
    if (noise_kind == "none")
        c.noise_kind = NoiseModel::Kind::none;
    else if (noise_kind == "poisson")
        c.noise_kind = NoiseModel::Kind::poisson;
    else
        throw ConfigError("unknown noise.kind: " + noise_kind);
    c.noise_scale = t.get_double("noise.scale", c.noise_scale);
    c.nsr_target = t.get_double("noise.nsr_target", 0.0);

    c.solver.method = method_from_name(t.get_string("solver.method", "gaussian-drs"));
    c.solver.rho = t.get_double("solver.rho", 1.0);
    c.solver.beta = t.get_double("solver.beta", 0.9);
    c.solver.max_iters = static_cast<int>(t.get_int("solver.max_iters", 1000));
    c.solver.tol = t.get_double("solver.tol", 0.0);
    c.solver.record_every = static_cast<int>(t.get_int("solver.record_every", 1));
    c.solver.project_every = static_cast<int>(t.get_int("solver.project_every", 0));

    c.blind.method = method_from_name(t.get_string("blind.method", "gaussian-drs"));
    c.blind.rho = t.get_double("blind.rho", 1.0);
    c.blind.rho_probe = t.get_double("blind.rho_probe", -1.0);
    c.blind.inner_tol = t.get_double("blind.inner_tol", 1e-4);
    c.blind.inner_cap = static_cast<int>(t.get_int("blind.inner_cap", 60));
    c.blind.max_epochs = static_cast<int>(t.get_int("blind.max_epochs", 100));
    c.blind.ppc_delta = t.get_double("blind.ppc_delta", 0.5);
    const auto ramp = t.get_double_array("blind.ppc_ramp");
    if (ramp.size() == 2)
        c.ppc_ramp = Eigen::Vector2i(static_cast<int>(ramp[0]), static_cast<int>(ramp[1]));
    else if (!ramp.empty())
        throw ConfigError("blind.ppc_ramp must have two entries");
    c.blind.bright.on = t.get_bool("blind.bright_enforce", false);
    c.blind.bright.value = Complex(t.get_double("blind.bright_value", c.bright_value), 0.0);
    c.blind.bright.frame_width =
        static_cast<int>(t.get_int("blind.bright_frame", c.bright_frame));
    c.blind.checkpoint_every = static_cast<int>(t.get_int("blind.checkpoint_every", 0));

    c.out_dir = t.get_string("output.dir", "out");
    c.write_images = t.get_bool("output.write_images", true);
    return c;
}

void ExperimentConfig::validate() const {
    if (object.n < 2) throw ConfigError("object.n must be >= 2");
    if (measurement == MeasurementKind::ptycho) {
        if (m < 2 || m >= object.n) throw ConfigError("probe.m must satisfy 2 <= m < n");
        if (tau < 1) throw ConfigError("scan.tau must be >= 1");
    }
    if (nsr_target < 0.0) throw ConfigError("noise.nsr_target must be >= 0");
    if (magnitude_scale <= 0.0) throw ConfigError("object.magnitude_scale must be > 0");
    if (bright_frame < 0) throw ConfigError("object.bright_frame must be >= 0");
    if (bright_frame > 0 && bright_value == 0.0)
        throw ConfigError("object.bright_value must be nonzero for a bright frame");
}

}  // namespace ptychodr
