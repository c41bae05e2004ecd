#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "iled/errors.hpp"

namespace iled::cli {

namespace {

struct Value {
    enum Kind { Str, Num, Bool, NumList } kind = Num;
    std::string s;
    double n = 0;
    bool b = false;
    std::vector<double> list;
    int line = 0;
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

Value parse_value(const std::string& raw, int line, const std::string& key) {
    Value v;
    v.line = line;
    const std::string s = trim(raw);
    if (s.empty()) throw ConfigError("config line " + std::to_string(line) + ": empty value for '" + key + "'");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated string for '" + key + "'");
        v.kind = Value::Str;
        v.s = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = Value::Bool;
        v.b = (s == "true");
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated array for '" + key + "'");
        v.kind = Value::NumList;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                std::size_t used = 0;
                v.list.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument("");
            } catch (...) {
                throw ConfigError("config line " + std::to_string(line) + ": '" + item +
                                  "' is not a number in array '" + key + "'");
            }
        }
        return v;
    }
    try {
        std::size_t used = 0;
        v.n = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        v.kind = Value::Num;
        return v;
    } catch (...) {
        throw ConfigError("config line " + std::to_string(line) + ": cannot parse value '" + s + "' for '" + key +
                          "' (strings need quotes)");
    }
}

std::map<std::string, Value> parse_toml_subset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, Value> kv;
    std::string section, line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (kv.count(full)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
        kv[full] = parse_value(line.substr(eq + 1), lineno, full);
    }
    return kv;
}

class Schema {
public:
    explicit Schema(std::map<std::string, Value> kv) : kv_(std::move(kv)) {}

    void str(const std::string& key, std::string& out) {
        auto v = take(key, Value::Str);
        if (v) out = v->s;
    }
    void num(const std::string& key, double& out) {
        auto v = take(key, Value::Num);
        if (v) out = v->n;
    }
    void integer(const std::string& key, int& out) {
        double d = static_cast<double>(out);
        num(key, d);
        if (d != std::floor(d)) throw ConfigError("config key '" + key + "' must be an integer");
        out = static_cast<int>(d);
    }
    void u64(const std::string& key, std::uint64_t& out) {
        double d = static_cast<double>(out);
        num(key, d);
        if (d < 0 || d != std::floor(d)) throw ConfigError("config key '" + key + "' must be a nonnegative integer");
        out = static_cast<std::uint64_t>(d);
    }
    void int_list(const std::string& key, std::vector<int>& out) {
        auto v = take(key, Value::NumList);
        if (!v) return;
        out.clear();
        for (double d : v->list) {
            if (d != std::floor(d)) throw ConfigError("config key '" + key + "' must hold integers");
            out.push_back(static_cast<int>(d));
        }
    }

    void finish() const {
        for (const auto& [key, v] : kv_)
            if (!consumed_.count(key))
                throw ConfigError("config line " + std::to_string(v.line) + ": unknown key '" + key + "'");
    }

private:
    const Value* take(const std::string& key, Value::Kind kind) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return nullptr;
        consumed_.insert(key);
        if (it->second.kind != kind) {
            const char* names[] = {"string", "number", "boolean", "array of numbers"};
            throw ConfigError("config key '" + key + "' must be a " + names[kind]);
        }
        return &it->second;
    }

    std::map<std::string, Value> kv_;
    std::set<std::string> consumed_;
};

}  // namespace

model::ModelSpec RunConfig::model_spec() const {
    model::ModelSpec s = system == "fhn" ? model::ModelSpec::fhn_default() : model::ModelSpec::ks_default();
    if (d_z > 0) s.d_z = d_z;
    if (d_h > 0) s.d_h = d_h;
    if (s.d_h < s.d_z) throw ConfigError("model.d_h must be >= model.d_z");
    std::vector<int> h1 = psi1_hidden, h2 = psi2_hidden;
    if (h1.empty()) {
        h1.assign(s.psi1_neurons.begin() + 1, s.psi1_neurons.end() - 1);  // per-system defaults
    }
    if (h2.empty() && s.psi2_neurons.size() >= 2) h2.assign(s.psi2_neurons.begin() + 1, s.psi2_neurons.end() - 1);
    s.psi1_neurons.clear();
    s.psi1_neurons.push_back(s.d_z + s.d_h);
    for (int w : h1) s.psi1_neurons.push_back(w);
    s.psi1_neurons.push_back(s.d_z);
    s.psi2_neurons.clear();
    if (s.d_h > s.d_z) {
        s.psi2_neurons.push_back(s.d_z);
        for (int w : h2) s.psi2_neurons.push_back(w);
        s.psi2_neurons.push_back(s.d_h - s.d_z);
    }
    s.eps_mem = eps_mem;
    return s;
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["system"] = system;
    j["seed"] = seed;
    j["threads"] = threads;
    j["fhn"] = nlohmann::json::parse(sim::fhn_config_json(fhn));
    j["ks"] = nlohmann::json::parse(sim::ks_config_json(ks));
    model::ModelSpec ms = model_spec();
    j["model"] = {{"d_z", ms.d_z},
                  {"d_h", ms.d_h},
                  {"psi1_neurons", ms.psi1_neurons},
                  {"psi2_neurons", ms.psi2_neurons},
                  {"eps_mem", ms.eps_mem},
                  {"centering_momentum", centering_momentum}};
    j["train"] = {{"window", train.window},
                  {"batch", train.batch},
                  {"lr", train.lr},
                  {"epochs", train.epochs},
                  {"clip_norm", train.clip_norm},
                  {"windows_per_traj", train.windows_per_traj},
                  {"warmup_slack", train.warmup_slack}};
    j["loss"] = {{"alpha1", loss.alpha1}, {"alpha2", loss.alpha2}, {"alpha3", loss.alpha3}, {"alpha_c", loss.alpha_c}};
    j["scan"] = {{"dims", scan_dims},
                 {"epochs", scan.epochs},
                 {"batches_per_epoch", scan.batches_per_epoch},
                 {"batch", scan.batch},
                 {"lr", scan.lr},
                 {"patience", scan.patience}};
    return j.dump(2);
}

RunConfig default_config(const std::string& system) {
    RunConfig rc;
    rc.system = system;
    if (system == "ks") {
        rc.train.window = 200;
        rc.train.batch = 8;
    }
    if (system != "fhn" && system != "ks") throw ConfigError("system must be fhn or ks, got '" + system + "'");
    return rc;
}

RunConfig load_config(const std::string& path) {
    Schema sc(parse_toml_subset(path));

    RunConfig rc;
    sc.str("system", rc.system);
    if (rc.system != "fhn" && rc.system != "ks")
        throw ConfigError("config key 'system' must be fhn or ks, got '" + rc.system + "'");
    rc = default_config(rc.system);
    sc.u64("seed", rc.seed);
    sc.integer("threads", rc.threads);

    sc.num("fhn.D_u", rc.fhn.D_u);
    sc.num("fhn.D_v", rc.fhn.D_v);
    sc.num("fhn.eps", rc.fhn.eps);
    sc.num("fhn.alpha0", rc.fhn.alpha0);
    sc.num("fhn.alpha1", rc.fhn.alpha1);
    sc.num("fhn.L", rc.fhn.L);
    sc.integer("fhn.N", rc.fhn.N);
    sc.num("fhn.solver_dt", rc.fhn.solver_dt);
    sc.num("fhn.sample_dt", rc.fhn.sample_dt);
    sc.num("fhn.traj_seconds", rc.fhn.traj_seconds);
    sc.integer("fhn.n_train", rc.fhn.n_train);
    sc.integer("fhn.n_val", rc.fhn.n_val);
    sc.num("fhn.test_seconds", rc.fhn.test_seconds);
    sc.num("fhn.warmup_seconds", rc.fhn.warmup_seconds);

    sc.num("ks.L", rc.ks.L);
    sc.integer("ks.N", rc.ks.N);
    sc.num("ks.solver_dt", rc.ks.solver_dt);
    sc.integer("ks.warmup_steps", rc.ks.warmup_steps);
    sc.num("ks.sample_dt", rc.ks.sample_dt);
    sc.integer("ks.samples_per_traj", rc.ks.samples_per_traj);
    sc.integer("ks.n_train", rc.ks.n_train);
    sc.integer("ks.n_val", rc.ks.n_val);
    sc.integer("ks.n_test", rc.ks.n_test);
    sc.num("ks.test_seconds", rc.ks.test_seconds);
    sc.num("ks.ic_rms", rc.ks.ic_rms);
    sc.integer("ks.ic_max_mode", rc.ks.ic_max_mode);

    sc.integer("model.d_z", rc.d_z);
    sc.integer("model.d_h", rc.d_h);
    sc.int_list("model.psi1_hidden", rc.psi1_hidden);
    sc.int_list("model.psi2_hidden", rc.psi2_hidden);
    sc.num("model.eps_mem", rc.eps_mem);
    sc.num("model.centering_momentum", rc.centering_momentum);

    sc.integer("train.window", rc.train.window);
    sc.integer("train.batch", rc.train.batch);
    sc.num("train.lr", rc.train.lr);
    sc.integer("train.epochs", rc.train.epochs);
    sc.num("train.clip_norm", rc.train.clip_norm);
    sc.integer("train.windows_per_traj", rc.train.windows_per_traj);
    sc.integer("train.warmup_slack", rc.train.warmup_slack);

    sc.num("loss.alpha1", rc.loss.alpha1);
    sc.num("loss.alpha2", rc.loss.alpha2);
    sc.num("loss.alpha3", rc.loss.alpha3);
    sc.num("loss.alpha_c", rc.loss.alpha_c);

    sc.int_list("scan.dims", rc.scan_dims);
    sc.integer("scan.epochs", rc.scan.epochs);
    sc.integer("scan.batches_per_epoch", rc.scan.batches_per_epoch);
    sc.integer("scan.batch", rc.scan.batch);
    sc.num("scan.lr", rc.scan.lr);
    sc.integer("scan.patience", rc.scan.patience);

    sc.finish();

    if (rc.eps_mem <= 0 || rc.eps_mem >= 1) throw ConfigError("model.eps_mem must lie in (0,1)");
    if (rc.train.window < 2) throw ConfigError("train.window must be >= 2");
    if (rc.loss.alpha1 < 0 || rc.loss.alpha2 < 0 || rc.loss.alpha3 < 0 || rc.loss.alpha_c < 0)
        throw ConfigError("loss weights must be nonnegative");
    return rc;
}

}  // namespace iled::cli
