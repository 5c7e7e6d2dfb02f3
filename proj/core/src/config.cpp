#include "hazebridge/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace hazebridge {

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Toy2d: return "toy2d";
        case ExperimentKind::SynthHaze: return "synth-haze";
        case ExperimentKind::ImageDir: return "image-dir";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "toy2d") return ExperimentKind::Toy2d;
    if (s == "synth-haze") return ExperimentKind::SynthHaze;
    if (s == "image-dir") return ExperimentKind::ImageDir;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

namespace {

std::string format_real(real v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(v));
    return buf;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    const auto last = s.find_last_not_of(" \t\r");
    if (first == std::string::npos) return "";
    return s.substr(first, last - first + 1);
}

struct Field {
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

real parse_real(const std::string& v, const char* key) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<real>(d);
    } catch (const std::exception&) {
        throw ConfigError(std::string("config: bad number for ") + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& v, const char* key) {
    try {
        size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<int64_t>(i);
    } catch (const std::exception&) {
        throw ConfigError(std::string("config: bad integer for ") + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const char* key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(std::string("config: bad boolean for ") + key + ": '" + v + "'");
}

#define REAL_FIELD(name)                                                             \
    Field{#name, [](const ExperimentConfig& c) { return format_real(c.name); },      \
          [](ExperimentConfig& c, const std::string& v) { c.name = parse_real(v, #name); }}
#define INT_FIELD(name)                                                              \
    Field{#name, [](const ExperimentConfig& c) { return std::to_string(c.name); },   \
          [](ExperimentConfig& c, const std::string& v) { c.name = parse_int(v, #name); }}
#define BOOL_FIELD(name)                                                             \
    Field{#name, [](const ExperimentConfig& c) { return c.name ? "true" : "false"; },\
          [](ExperimentConfig& c, const std::string& v) { c.name = parse_bool(v, #name); }}
#define STRING_FIELD(name)                                                           \
    Field{#name, [](const ExperimentConfig& c) { return c.name; },                   \
          [](ExperimentConfig& c, const std::string& v) { c.name = v; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        INT_FIELD(schema_version),
        Field{"kind", [](const ExperimentConfig& c) { return to_string(c.kind); },
              [](ExperimentConfig& c, const std::string& v) {
                  c.kind = experiment_kind_from_string(v);
              }},
        Field{"seed",
              [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, const std::string& v) {
                  try {
                      c.seed = std::stoull(v);
                  } catch (const std::exception&) {
                      throw ConfigError("config: bad seed '" + v + "'");
                  }
              }},
        STRING_FIELD(out_dir),
        INT_FIELD(n_intervals),
        REAL_FIELD(tau),
        REAL_FIELD(lambda_sb),
        REAL_FIELD(lambda_p),
        REAL_FIELD(lambda_nce),
        REAL_FIELD(lambda_phy),
        REAL_FIELD(lambda_hfd),
        INT_FIELD(steps),
        INT_FIELD(batch_size),
        REAL_FIELD(lr),
        REAL_FIELD(adam_beta1),
        REAL_FIELD(adam_beta2),
        INT_FIELD(eval_every),
        INT_FIELD(checkpoint_every),
        INT_FIELD(gen_channels),
        INT_FIELD(gen_res_blocks),
        INT_FIELD(disc_channels),
        INT_FIELD(point_hidden),
        INT_FIELD(prompt_steps),
        REAL_FIELD(prompt_lr),
        BOOL_FIELD(prompt_loss_both_terms),
        INT_FIELD(nce_locations),
        REAL_FIELD(nce_temperature),
        REAL_FIELD(dcp_omega),
        INT_FIELD(dcp_patch),
        REAL_FIELD(dcp_t_min),
        INT_FIELD(refiner_pretrain_steps),
        INT_FIELD(image_size),
        INT_FIELD(n_clear_images),
        REAL_FIELD(a_min),
        REAL_FIELD(a_max),
        REAL_FIELD(t_mean_min),
        REAL_FIELD(t_mean_max),
        STRING_FIELD(hazy_dir),
        STRING_FIELD(clear_dir),
        STRING_FIELD(toy_source),
        STRING_FIELD(toy_target),
        INT_FIELD(toy_n),
        INT_FIELD(toy_batch),
        STRING_FIELD(eval_nfes),
    };
    return f;
}

#undef REAL_FIELD
#undef INT_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

}  // namespace

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << "\n";
    return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        bool matched = false;
        for (const auto& f : fields()) {
            if (key == f.key) {
                if (!seen.insert(key).second)
                    throw ConfigError("config: duplicate key '" + key + "'");
                f.set(cfg, value);
                matched = true;
                break;
            }
        }
        if (!matched) throw ConfigError("config: unknown key '" + key + "'");
    }
    if (!seen.count("schema_version"))
        throw ConfigError("config: missing schema_version");
    if (cfg.schema_version != 1)
        throw ConfigError("config: unsupported schema_version " +
                          std::to_string(cfg.schema_version));
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return parse(os.str());
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("config: cannot write " + path);
    os << serialize();
}

void ExperimentConfig::validate() const {
    auto in_unit = [](real v) { return v > 0 && v <= 1; };
    if (n_intervals < 1) throw ConfigError("config: n_intervals must be >= 1");
    if (tau < 0) throw ConfigError("config: tau must be >= 0");
    if (lambda_sb < 0 || lambda_p < 0 || lambda_nce < 0 || lambda_phy < 0 || lambda_hfd < 0)
        throw ConfigError("config: loss weights must be nonnegative");
    if (steps < 1) throw ConfigError("config: steps must be >= 1");
    if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
    if (lr <= 0) throw ConfigError("config: lr must be positive");
    if (kind == ExperimentKind::SynthHaze) {
        if (!in_unit(a_min) || !in_unit(a_max) || a_min > a_max)
            throw ConfigError("config: atmospheric light range must satisfy 0 < a_min <= a_max <= 1");
        if (!in_unit(t_mean_min) || !in_unit(t_mean_max) || t_mean_min > t_mean_max)
            throw ConfigError("config: transmission range must satisfy 0 < t_mean_min <= t_mean_max <= 1");
        if (image_size < 8) throw ConfigError("config: image_size must be >= 8");
        if (n_clear_images < 2 * batch_size)
            throw ConfigError("config: need n_clear_images >= 2 * batch_size");
    }
    if (kind == ExperimentKind::ImageDir) {
        if (hazy_dir.empty() || clear_dir.empty())
            throw ConfigError("config: image-dir mode needs hazy_dir and clear_dir");
    }
    if (kind == ExperimentKind::Toy2d) {
        if (toy_n < 100) throw ConfigError("config: toy_n must be >= 100");
        if (toy_batch < 2) throw ConfigError("config: toy_batch must be >= 2");
    }
    if (dcp_omega <= 0 || dcp_omega > 1) throw ConfigError("config: dcp_omega must be in (0,1]");
    if (dcp_patch < 1 || dcp_patch % 2 == 0)
        throw ConfigError("config: dcp_patch must be odd and positive");
    if (dcp_t_min <= 0 || dcp_t_min >= 1) throw ConfigError("config: dcp_t_min must be in (0,1)");
    if (nce_temperature <= 0) throw ConfigError("config: nce_temperature must be positive");
}

}  // namespace hazebridge
