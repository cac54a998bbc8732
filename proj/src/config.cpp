// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "itrlhf/snapshot.hpp"

namespace itrlhf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& text, std::string_view key) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + text + "'");
  return value;
}

double parse_real(const std::string& text, std::string_view key) {
  // from_chars for double is not available in every libstdc++ we target.
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, std::string_view key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" + text + "'");
}

std::vector<int> parse_int_list(const std::string& text, std::string_view key) {
  std::vector<int> out;
  if (text == "none" || text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item), key));
  return out;
}

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define ITRLHF_INT_FIELD(KEY, MEMBER, TYPE, DOC)                                   \
  Field {                                                                          \
    KEY, DOC, [](const RunConfig& c) { return std::to_string(c.MEMBER); },         \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_number<TYPE>(v, KEY); } \
  }
#define ITRLHF_REAL_FIELD(KEY, MEMBER, DOC)                                     \
  Field {                                                                       \
    KEY, DOC, [](const RunConfig& c) { return fmt_double(c.MEMBER); },          \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_real(v, KEY); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      ITRLHF_INT_FIELD("world.seed", world.seed, std::uint64_t, "seed of the synthetic world"),
      ITRLHF_INT_FIELD("world.prompts", world.n_prompts, int, "number of prompts P (>= 2)"),
      ITRLHF_INT_FIELD("world.responses", world.n_responses, int, "response catalog size M (>= 4)"),
      ITRLHF_INT_FIELD("world.feat_dim", world.feat_dim, int, "feature dimension d (>= 2)"),
      ITRLHF_REAL_FIELD("sft.temperature", sft.temperature, "temperature of the gold-Boltzmann demonstrations"),
      ITRLHF_INT_FIELD("sft.demos", sft.n_demos, int, "number of SFT demonstrations"),
      ITRLHF_INT_FIELD("sft.seed", sft.seed, std::uint64_t, "seed of the SFT demonstrations"),
      ITRLHF_INT_FIELD("run.iterations", n_iterations, int, "RLHF iterations per run"),
      ITRLHF_INT_FIELD("run.seeds", n_seeds, int, "seeds per sweep (run seeds 0..n-1)"),
      ITRLHF_INT_FIELD("run.master_seed", master_seed, std::uint64_t, "root of every stage seed"),
      ITRLHF_INT_FIELD("run.jobs", jobs, int, "parallel seeds in a sweep"),
      Field{"strategy.data", "take_last | concatenate | sample | sample_exclusive",
            [](const RunConfig& c) { return std::string(to_string(c.data_strategy)); },
            [](RunConfig& c, const std::string& v) { c.data_strategy = parse_data_strategy(v); }},
      Field{"strategy.rm", "take_last | ensemble_mean | worst_case | weight_average",
            [](const RunConfig& c) { return std::string(to_string(c.rm_strategy)); },
            [](RunConfig& c, const std::string& v) { c.rm_strategy = parse_reward_strategy(v); }},
      Field{"strategy.policy_init", "from_sft | take_last | liti",
            [](const RunConfig& c) { return std::string(to_string(c.policy_init_strategy)); },
            [](RunConfig& c, const std::string& v) { c.policy_init_strategy = parse_init_strategy(v); }},
      ITRLHF_REAL_FIELD("strategy.eta", eta, "LITI interpolation weight in [0, 1]"),
      Field{"strategy.sample_remainder", "recent | oldest: which datasets take the N mod k extra samples",
            [](const RunConfig& c) {
              return std::string(c.sample_remainder == RemainderPolicy::MostRecent ? "recent" : "oldest");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "recent")
                c.sample_remainder = RemainderPolicy::MostRecent;
              else if (v == "oldest")
                c.sample_remainder = RemainderPolicy::Oldest;
              else
                throw ConfigError("strategy.sample_remainder must be recent or oldest, got '" + v + "'");
            }},
      Field{"prefs.label_mode", "bt-sample | argmax",
            [](const RunConfig& c) { return std::string(to_string(c.label_mode)); },
            [](RunConfig& c, const std::string& v) { c.label_mode = parse_label_mode(v); }},
      ITRLHF_INT_FIELD("prefs.per_iteration", n_prefs, int, "comparisons collected per iteration"),
      Field{"rm.hidden", "comma-separated hidden widths, or none for a linear model",
            [](const RunConfig& c) {
              if (c.rm.hidden.empty()) return std::string("none");
              std::string s;
              for (int w : c.rm.hidden) s += (s.empty() ? "" : ",") + std::to_string(w);
              return s;
            },
            [](RunConfig& c, const std::string& v) { c.rm.hidden = parse_int_list(v, "rm.hidden"); }},
      ITRLHF_INT_FIELD("rm.epochs", rm.epochs, int, "reward-model epochs"),
      ITRLHF_INT_FIELD("rm.batch", rm.batch_size, int, "reward-model minibatch size"),
      ITRLHF_REAL_FIELD("rm.lr", rm.lr, "reward-model learning rate"),
      Field{"rm.optimizer", "adam | sgd",
            [](const RunConfig& c) { return std::string(c.rm.optimizer == OptimizerKind::Adam ? "adam" : "sgd"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "adam")
                c.rm.optimizer = OptimizerKind::Adam;
              else if (v == "sgd")
                c.rm.optimizer = OptimizerKind::Sgd;
              else
                throw ConfigError("rm.optimizer must be adam or sgd, got '" + v + "'");
            }},
      Field{"rm.train_body", "true | false: fine-tune the body or only the head",
            [](const RunConfig& c) { return std::string(c.rm.train_body ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.rm.train_body = parse_bool(v, "rm.train_body"); }},
      ITRLHF_INT_FIELD("ppo.steps", ppo.steps, long, "policy optimisation steps per iteration"),
      ITRLHF_REAL_FIELD("ppo.lr", ppo.lr, "policy learning rate"),
      ITRLHF_REAL_FIELD("ppo.beta", ppo.beta, "KL penalty coefficient"),
      ITRLHF_REAL_FIELD("ppo.clip", ppo.clip, "surrogate clipping range in (0, 1]"),
      ITRLHF_INT_FIELD("ppo.rollouts", ppo.rollouts_per_step, int, "rollouts per step"),
      ITRLHF_INT_FIELD("ppo.minibatch", ppo.minibatch, int, "surrogate minibatch size"),
      ITRLHF_INT_FIELD("ppo.eval_every", ppo.eval_every, long, "steps between checkpoints"),
      ITRLHF_REAL_FIELD("ppo.gae_lambda", ppo.gae_lambda, "recorded only; unused by the bandit update"),
      Field{"ppo.optimizer", "adam | sgd",
            [](const RunConfig& c) { return std::string(c.ppo.optimizer == OptimizerKind::Adam ? "adam" : "sgd"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "adam")
                c.ppo.optimizer = OptimizerKind::Adam;
              else if (v == "sgd")
                c.ppo.optimizer = OptimizerKind::Sgd;
              else
                throw ConfigError("ppo.optimizer must be adam or sgd, got '" + v + "'");
            }},
      Field{"ppo.kl_reference", "init | sft: policy the KL penalty is measured against",
            [](const RunConfig& c) { return std::string(c.ppo.kl_reference == KlReference::Init ? "init" : "sft"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "init")
                c.ppo.kl_reference = KlReference::Init;
              else if (v == "sft")
                c.ppo.kl_reference = KlReference::Sft;
              else
                throw ConfigError("ppo.kl_reference must be init or sft, got '" + v + "'");
            }},
      ITRLHF_INT_FIELD("eval.holdout", holdout_size, int, "holdout (prompt, response) pairs per checkpoint"),
      ITRLHF_REAL_FIELD("eval.bucket_width", bucket_width, "KL bucket width in nats"),
      Field{"eval.mmd_bandwidth", "positive kernel bandwidth, or median for the median heuristic",
            [](const RunConfig& c) { return c.mmd_bandwidth ? fmt_double(*c.mmd_bandwidth) : std::string("median"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "median")
                c.mmd_bandwidth.reset();
              else
                c.mmd_bandwidth = parse_real(v, "eval.mmd_bandwidth");
            }},
  };
  return table;
}

#undef ITRLHF_INT_FIELD
#undef ITRLHF_REAL_FIELD

}  // namespace

void RunConfig::validate() const {
  if (world.n_prompts < 2 || world.n_responses < 4 || world.feat_dim < 2)
    throw ConfigError("world dimensions need prompts >= 2, responses >= 4, feat_dim >= 2");
  if (!(sft.temperature > 0.0)) throw ConfigError("sft.temperature must be > 0");
  if (sft.n_demos < 1) throw ConfigError("sft.demos must be >= 1");
  if (n_iterations < 1) throw ConfigError("run.iterations must be >= 1");
  if (n_seeds < 1) throw ConfigError("run.seeds must be >= 1");
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("strategy.eta must lie in [0, 1]");
  if (n_prefs < 1) throw ConfigError("prefs.per_iteration must be >= 1");
  if (rm.epochs < 0 || rm.batch_size < 1 || !(rm.lr > 0.0)) throw ConfigError("invalid rm hyperparameters");
  for (int w : rm.hidden)
    if (w < 1) throw ConfigError("rm.hidden widths must be positive");
  ppo.validate();
  if (holdout_size < 2) throw ConfigError("eval.holdout must be >= 2");
  if (!(bucket_width > 0.0)) throw ConfigError("eval.bucket_width must be > 0");
  if (mmd_bandwidth && !(*mmd_bandwidth > 0.0)) throw ConfigError("eval.mmd_bandwidth must be > 0");
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end())
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    it->second->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string canonical_config(const RunConfig& cfg) {
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields()) sorted[f.key] = f.get(cfg);
  std::string out;
  for (const auto& [k, v] : sorted) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(canonical_config(cfg)); }

std::string config_schema_doc() {
  const RunConfig defaults;
  std::string out =
      "Config file: plain text, one 'key = value' per line, '#' starts a comment.\n"
      "Keys may appear in any order; omitted keys take the defaults below.\n\n";
  for (const auto& f : fields()) {
    out += "  " + f.key + " = " + f.get(defaults) + "\n      " + f.doc + "\n";
  }
  return out;
}

}  // namespace itrlhf
