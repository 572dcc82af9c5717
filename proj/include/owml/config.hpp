#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace owml {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Every knob of the pipeline, as documented key = value pairs. Precedence,
// lowest to highest: built-in default, config file, CLI flag, OWML_<KEY>
// environment variable.
struct RunConfig {
    std::map<std::string, std::string> values;

    // key -> {default, description}
    static const std::map<std::string, std::pair<std::string, std::string>>&
    schema() {
        static const std::map<std::string, std::pair<std::string, std::string>> s{
            {"out_dir", {"out", "artifact directory"}},
            {"seed", {"1", "master seed for data, model init and training"}},
            {"threads", {"1", "worker cap for parallel stage internals"}},
            {"n_games", {"200000", "training games to generate"}},
            {"eval_games", {"200", "held-out games for eval metrics"}},
            {"max_seq_len", {"61", "token positions per game (60 moves + EOS)"}},
            {"states_per_game", {"52", "leading states kept per game for labels"}},
            {"acts_games", {"2000", "games forwarded for activation extraction"}},
            {"n_layers", {"4", "transformer blocks"}},
            {"n_heads", {"4", "attention heads"}},
            {"d_model", {"128", "residual stream width"}},
            {"gpt_steps", {"20000", "GPT Adam steps"}},
            {"gpt_batch", {"64", "GPT batch size (sequences)"}},
            {"gpt_lr", {"0.001", "GPT peak learning rate"}},
            {"gpt_eval_every", {"250", "steps between held-out evals"}},
            {"gpt_cosine_decay", {"true", "cosine learning-rate decay"}},
            {"layers", {"all", "layers for extraction/analysis: 'all' or CSV"}},
            {"sae_d_latent", {"0", "SAE latent width; 0 means 2*d_model"}},
            {"sae_lambda", {"0.1", "SAE L1 coefficient"}},
            {"sae_steps", {"2000", "SAE Adam steps"}},
            {"sae_batch", {"256", "SAE batch size (rows)"}},
            {"sae_lr", {"0.001", "SAE learning rate"}},
            {"sae_seeds", {"10", "independent SAE initialization seeds"}},
            {"probe_steps", {"2000", "probe Adam steps"}},
            {"probe_batch", {"256", "probe batch size (rows)"}},
            {"probe_lr", {"0.001", "probe learning rate"}},
            {"probe_structure",
             {"pertile", "probe structure: pertile | multiclass"}},
            {"color_auroc_threshold", {"0.7", "color feature selection threshold"}},
            {"color_top_k", {"50", "color features kept per seed"}},
            {"color_tally", {"best", "color grid tally: best | pertile"}},
            {"color_auroc_method", {"rank", "color AUROC: rank | trapezoid"}},
            {"stability_auroc_threshold",
             {"0.8", "stability qualification threshold"}},
            {"stability_auroc_method",
             {"rank", "stability AUROC: rank | trapezoid"}},
            {"stability_adjacency",
             {"four", "edge-stability adjacency: four | eight"}},
            {"stability_seeds", {"2", "SAE seeds scored for stability"}},
            {"align_threshold", {"0.2", "|cosine| threshold for neuron counts"}},
            {"align_baseline_samples",
             {"100000", "Monte Carlo samples for the alignment chance baseline"}},
        };
        return s;
    }

    const std::string& get(const std::string& key) const {
        auto it = values.find(key);
        if (it != values.end()) return it->second;
        auto d = schema().find(key);
        if (d == schema().end()) throw ConfigError("unknown config key: " + key);
        return d->second.first;
    }

    void set(const std::string& key, const std::string& value) {
        if (!schema().count(key)) throw ConfigError("unknown config key: " + key);
        values[key] = value;
    }

    long i64(const std::string& key) const {
        const std::string& v = get(key);
        std::size_t pos = 0;
        long out = 0;
        try {
            out = std::stol(v, &pos);
        } catch (const std::exception&) {
            throw ConfigError("config " + key + ": not an integer: " + v);
        }
        if (pos != v.size())
            throw ConfigError("config " + key + ": not an integer: " + v);
        return out;
    }

    double dbl(const std::string& key) const {
        const std::string& v = get(key);
        std::size_t pos = 0;
        double out = 0;
        try {
            out = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw ConfigError("config " + key + ": not a number: " + v);
        }
        if (pos != v.size())
            throw ConfigError("config " + key + ": not a number: " + v);
        return out;
    }

    bool flag(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config " + key + ": not a boolean: " + v);
    }

    // 'all' expands against n_layers; otherwise a comma-separated 1-based list
    std::vector<int> layer_list() const {
        const long n = i64("n_layers");
        std::vector<int> out;
        const std::string& v = get("layers");
        if (v == "all") {
            for (int l = 1; l <= n; ++l) out.push_back(l);
            return out;
        }
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::size_t pos = 0;
            int l = 0;
            try {
                l = std::stoi(item, &pos);
            } catch (const std::exception&) {
                throw ConfigError("config layers: bad entry: " + item);
            }
            if (pos != item.size() || l < 1 || l > n)
                throw ConfigError("config layers: bad entry: " + item);
            out.push_back(l);
        }
        if (out.empty()) throw ConfigError("config layers: empty list");
        return out;
    }

    // fully resolved, sorted, one key = value per line
    std::string resolved() const {
        std::string out;
        for (const auto& [key, dd] : schema())
            out += key + " = " + get(key) + "\n";
        return out;
    }
};

namespace configdetail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace configdetail

// Line-oriented `key = value` with # comments and blank lines.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = configdetail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = configdetail::trim(line.substr(0, eq));
        const std::string value = configdetail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        cfg.set(key, value);
    }
}

// OWML_<KEY> (upper-cased key) overrides everything else.
inline void apply_env(RunConfig& cfg) {
    for (const auto& [key, dd] : RunConfig::schema()) {
        std::string env = "OWML_" + key;
        std::transform(env.begin(), env.end(), env.begin(),
                       [](unsigned char c) { return char(std::toupper(c)); });
        if (const char* v = std::getenv(env.c_str())) cfg.set(key, v);
    }
}

}  // namespace owml
