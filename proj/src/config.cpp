#include "charlab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "charlab/errors.hpp"
#include "charlab/rng.hpp"

namespace charlab {

namespace {

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "model", "preset", "downsampler", "upsampler",
        "d_model", "layers", "heads", "ffw_mult", "seq_len", "window",
        "hash_k", "hash_buckets", "hash_only", "dropout",
        "masking", "target", "mask_rate", "token_loss_position",
        "corrupt_mask_prob", "corrupt_random_prob",
        "max_lr", "min_lr", "warmup_steps", "total_steps",
        "beta1", "beta2", "adam_eps", "weight_decay",
        "clip_norm", "ema_decay", "ema_every",
        "batch_size", "eval_interval",
        "seed", "deterministic", "precision",
        "corpus", "eval_fraction", "tokeniser", "output_dir",
        "eval_task", "eval_task_path", "selection_metric",
    };
    return keys;
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string nearest_key(const std::string& key) {
    std::string best;
    size_t best_dist = std::string::npos;
    for (const auto& k : known_keys()) {
        const size_t d = edit_distance(key, k);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

std::string trim(const std::string& s) {
    size_t lo = 0, hi = s.size();
    while (lo < hi && (s[lo] == ' ' || s[lo] == '\t')) ++lo;
    while (hi > lo && (s[hi - 1] == ' ' || s[hi - 1] == '\t' || s[hi - 1] == '\r')) --hi;
    return s.substr(lo, hi - lo);
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "': expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "': expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: key '" + key + "': expected true/false, got '" + value + "'");
}

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using model::ArchConfig;
    if (key == "model") {
        if (value == "char") cfg.model = ModelKind::char_model;
        else if (value == "token") cfg.model = ModelKind::token_baseline;
        else throw ConfigError("config: model must be char | token, got '" + value + "'");
    } else if (key == "preset") {
        const bool hash_only = cfg.arch.hash_only;
        if (value == "toy") cfg.arch = ArchConfig::toy();
        else if (value == "full") cfg.arch = ArchConfig::full();
        else if (value == "gradcheck") cfg.arch = ArchConfig::grad_check();
        else throw ConfigError("config: preset must be toy | full | gradcheck, got '" + value + "'");
        cfg.arch.hash_only = hash_only;
        if (value == "full") {
            cfg.schedule = optim::SchedulePreset{1.25e-3, 1.25e-5, 3125, 250000};
            cfg.batch_size = 3072;
            cfg.eval_interval = 10000;
        }
    } else if (key == "downsampler") {
        cfg.arch.downsampler = model::downsampler_from_string(value);
    } else if (key == "upsampler") {
        cfg.arch.upsampler = model::upsampler_from_string(value);
    } else if (key == "d_model") {
        cfg.arch.d = parse_int(key, value);
    } else if (key == "layers") {
        cfg.arch.layers = parse_int(key, value);
    } else if (key == "heads") {
        cfg.arch.heads = parse_int(key, value);
    } else if (key == "ffw_mult") {
        cfg.arch.ffw_mult = parse_int(key, value);
    } else if (key == "seq_len") {
        cfg.arch.seq_len = parse_int(key, value);
    } else if (key == "window") {
        cfg.arch.window = parse_int(key, value);
    } else if (key == "hash_k") {
        cfg.arch.hash_k = static_cast<int>(parse_int(key, value));
    } else if (key == "hash_buckets") {
        cfg.arch.hash_buckets = parse_int(key, value);
    } else if (key == "hash_only") {
        cfg.arch.hash_only = parse_bool(key, value);
    } else if (key == "dropout") {
        cfg.arch.dropout_rate = parse_double(key, value);
    } else if (key == "masking") {
        cfg.masking = objectives::masking_from_string(value);
    } else if (key == "target") {
        cfg.target = objectives::target_from_string(value);
    } else if (key == "mask_rate") {
        cfg.mask_rate = parse_double(key, value);
    } else if (key == "token_loss_position") {
        if (value == "first") cfg.token_loss_position = objectives::TokenLossPosition::first;
        else if (value == "all") cfg.token_loss_position = objectives::TokenLossPosition::all_averaged;
        else throw ConfigError("config: token_loss_position must be first | all, got '" + value + "'");
    } else if (key == "corrupt_mask_prob") {
        cfg.corrupt_mask_prob = parse_double(key, value);
    } else if (key == "corrupt_random_prob") {
        cfg.corrupt_random_prob = parse_double(key, value);
    } else if (key == "max_lr") {
        cfg.schedule.max_lr = parse_double(key, value);
    } else if (key == "min_lr") {
        cfg.schedule.min_lr = parse_double(key, value);
    } else if (key == "warmup_steps") {
        cfg.schedule.warmup_steps = parse_int(key, value);
    } else if (key == "total_steps") {
        cfg.schedule.total_steps = parse_int(key, value);
    } else if (key == "beta1") {
        cfg.lamb.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
        cfg.lamb.beta2 = parse_double(key, value);
    } else if (key == "adam_eps") {
        cfg.lamb.eps = parse_double(key, value);
    } else if (key == "weight_decay") {
        cfg.lamb.weight_decay = parse_double(key, value);
    } else if (key == "clip_norm") {
        cfg.clip_norm = parse_double(key, value);
    } else if (key == "ema_decay") {
        cfg.ema_decay = parse_double(key, value);
    } else if (key == "ema_every") {
        cfg.ema_every = parse_int(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_int(key, value);
    } else if (key == "eval_interval") {
        cfg.eval_interval = parse_int(key, value);
    } else if (key == "seed") {
        cfg.seed = static_cast<uint64_t>(parse_int(key, value));
    } else if (key == "deterministic") {
        cfg.deterministic = parse_bool(key, value);
    } else if (key == "precision") {
        const int64_t p = parse_int(key, value);
        if (p != 32 && p != 64) throw ConfigError("config: precision must be 32 or 64");
        cfg.precision = static_cast<int>(p);
    } else if (key == "corpus") {
        cfg.corpus = value;
    } else if (key == "eval_fraction") {
        cfg.eval_fraction = parse_double(key, value);
    } else if (key == "tokeniser") {
        cfg.tokeniser = value;
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "eval_task") {
        if (value != "none" && value != "tagging" && value != "span")
            throw ConfigError("config: eval_task must be none | tagging | span");
        cfg.eval_task = value;
    } else if (key == "eval_task_path") {
        cfg.eval_task_path = value;
    } else if (key == "selection_metric") {
        if (value != "eval_loss" && value != "task_f1")
            throw ConfigError("config: selection_metric must be eval_loss | task_f1");
        cfg.selection_metric = value;
    } else {
        throw ConfigError("config: unknown key '" + key + "'; nearest valid key is '" + nearest_key(key) + "'");
    }
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + ": expected 'key = value'");
        pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return pairs;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    auto pairs = parse_pairs(text);
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("config: override '" + ov + "' must be key=value");
        std::string key = trim(ov.substr(0, eq));
        std::string value = trim(ov.substr(eq + 1));
        pairs.emplace_back(std::move(key), std::move(value));
    }
    // preset first so explicit keys override it regardless of file order
    for (const auto& [k, v] : pairs)
        if (k == "preset") apply_key(cfg, k, v);
    for (const auto& [k, v] : pairs)
        if (k != "preset") apply_key(cfg, k, v);
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::string text;
    if (!path.empty()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("config: cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, overrides);
}

void RunConfig::validate() const {
    objectives::check_objective_cell(masking, target);
    if (arch.d <= 0 || arch.layers < 0 || arch.heads <= 0) throw ConfigError("config: bad model dimensions");
    if (arch.d % arch.heads != 0) throw ConfigError("config: heads must divide d_model");
    if (arch.d % arch.hash_k != 0) throw ConfigError("config: hash_k must divide d_model");
    if (arch.seq_len % 4 != 0) throw ConfigError("config: seq_len must be a multiple of the downsampling rate 4");
    if (arch.window <= 0) throw ConfigError("config: window must be positive");
    if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("config: mask_rate must be in [0, 1]");
    if (schedule.warmup_steps <= 0 || schedule.warmup_steps >= schedule.total_steps)
        throw ConfigError("config: need 0 < warmup_steps < total_steps");
    if (schedule.min_lr > schedule.max_lr) throw ConfigError("config: min_lr must not exceed max_lr");
    if (batch_size <= 0 || eval_interval <= 0) throw ConfigError("config: batch_size and eval_interval must be positive");
    if (eval_fraction < 0.0 || eval_fraction >= 1.0) throw ConfigError("config: eval_fraction must be in [0, 1)");
    if (corrupt_mask_prob < 0 || corrupt_random_prob < 0 || corrupt_mask_prob + corrupt_random_prob > 1.0)
        throw ConfigError("config: corruption probabilities must be non-negative and sum to at most 1");
    if (model == ModelKind::token_baseline && tokeniser.empty() && !corpus.empty())
        throw ConfigError("config: the token baseline needs a tokeniser file");
    const bool needs_tokeniser = masking == objectives::MaskingScheme::tokeniser ||
                                 target == objectives::PredictionTarget::token;
    if (model == ModelKind::char_model && needs_tokeniser && tokeniser.empty() && !corpus.empty())
        throw ConfigError("config: tokeniser-based masking/targets need a tokeniser file");
}

std::string RunConfig::echo() const {
    std::map<std::string, std::string> kv;
    kv["model"] = model == ModelKind::char_model ? "char" : "token";
    kv["downsampler"] = model::to_string(arch.downsampler);
    kv["upsampler"] = model::to_string(arch.upsampler);
    kv["d_model"] = std::to_string(arch.d);
    kv["layers"] = std::to_string(arch.layers);
    kv["heads"] = std::to_string(arch.heads);
    kv["ffw_mult"] = std::to_string(arch.ffw_mult);
    kv["seq_len"] = std::to_string(arch.seq_len);
    kv["window"] = std::to_string(arch.window);
    kv["hash_k"] = std::to_string(arch.hash_k);
    kv["hash_buckets"] = std::to_string(arch.hash_buckets);
    kv["hash_only"] = arch.hash_only ? "true" : "false";
    kv["dropout"] = format_double(arch.dropout_rate);
    kv["masking"] = objectives::to_string(masking);
    kv["target"] = objectives::to_string(target);
    kv["mask_rate"] = format_double(mask_rate);
    kv["token_loss_position"] = token_loss_position == objectives::TokenLossPosition::first ? "first" : "all";
    kv["corrupt_mask_prob"] = format_double(corrupt_mask_prob);
    kv["corrupt_random_prob"] = format_double(corrupt_random_prob);
    kv["max_lr"] = format_double(schedule.max_lr);
    kv["min_lr"] = format_double(schedule.min_lr);
    kv["warmup_steps"] = std::to_string(schedule.warmup_steps);
    kv["total_steps"] = std::to_string(schedule.total_steps);
    kv["beta1"] = format_double(lamb.beta1);
    kv["beta2"] = format_double(lamb.beta2);
    kv["adam_eps"] = format_double(lamb.eps);
    kv["weight_decay"] = format_double(lamb.weight_decay);
    kv["clip_norm"] = format_double(clip_norm);
    kv["ema_decay"] = format_double(ema_decay);
    kv["ema_every"] = std::to_string(ema_every);
    kv["batch_size"] = std::to_string(batch_size);
    kv["eval_interval"] = std::to_string(eval_interval);
    kv["seed"] = std::to_string(seed);
    kv["deterministic"] = deterministic ? "true" : "false";
    kv["precision"] = std::to_string(precision);
    kv["corpus"] = corpus;
    kv["eval_fraction"] = format_double(eval_fraction);
    kv["tokeniser"] = tokeniser;
    kv["output_dir"] = output_dir;
    kv["eval_task"] = eval_task;
    kv["eval_task_path"] = eval_task_path;
    kv["selection_metric"] = selection_metric;
    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    return out.str();
}

std::map<std::string, std::string> RunConfig::arch_identity() const {
    std::map<std::string, std::string> kv;
    kv["model"] = model == ModelKind::char_model ? "char" : "token";
    kv["downsampler"] = model::to_string(arch.downsampler);
    kv["upsampler"] = model::to_string(arch.upsampler);
    kv["d_model"] = std::to_string(arch.d);
    kv["layers"] = std::to_string(arch.layers);
    kv["heads"] = std::to_string(arch.heads);
    kv["ffw_mult"] = std::to_string(arch.ffw_mult);
    kv["seq_len"] = std::to_string(arch.seq_len);
    kv["window"] = std::to_string(arch.window);
    kv["hash_k"] = std::to_string(arch.hash_k);
    kv["hash_buckets"] = std::to_string(arch.hash_buckets);
    kv["hash_only"] = arch.hash_only ? "true" : "false";
    kv["masking"] = objectives::to_string(masking);
    kv["target"] = objectives::to_string(target);
    kv["precision"] = std::to_string(precision);
    return kv;
}

uint64_t config_hash(const std::map<std::string, std::string>& identity) {
    std::string flat;
    for (const auto& [k, v] : identity) {
        flat += k;
        flat += '=';
        flat += v;
        flat += '\n';
    }
    return Rng::fnv1a(flat);
}

}  // namespace charlab
