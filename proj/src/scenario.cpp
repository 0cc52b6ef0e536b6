#include "seemore/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace seemore {

namespace {

struct ParseError {
  std::string what;
};

uint64_t get_u64(const json& j, const char* key, uint64_t def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_unsigned() && !j[key].is_number_integer())
    throw ParseError{std::string(key) + " must be an integer"};
  return j[key].get<uint64_t>();
}

double get_f64(const json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw ParseError{std::string(key) + " must be a number"};
  return j[key].get<double>();
}

Mode get_mode(const json& j, const char* key, Mode def) {
  if (!j.contains(key)) return def;
  Mode m;
  if (!mode_from_name(j[key].get<std::string>(), m))
    throw ParseError{"unknown mode: " + j[key].get<std::string>()};
  return m;
}

ClusterConfig parse_cluster(const json& j) {
  ClusterConfig cfg;
  cfg.private_size = uint32_t(get_u64(j, "S", 0));
  cfg.crash_bound = uint32_t(get_u64(j, "c", 0));
  cfg.byz_bound = uint32_t(get_u64(j, "m", 0));
  if (j.contains("P")) {
    cfg.public_size = uint32_t(get_u64(j, "P", 0));
  } else {
    // derive the rental size from the offered fault ratios
    SizingInput in;
    in.private_size = cfg.private_size;
    in.crash_bound = cfg.crash_bound;
    if (j.contains("alpha")) in.alpha = get_f64(j, "alpha", 0);
    if (j.contains("beta")) in.beta = get_f64(j, "beta", 0);
    if (j.contains("M")) in.byz_cluster = uint32_t(get_u64(j, "M", 0));
    if (j.contains("C")) in.crash_cluster = uint32_t(get_u64(j, "C", 0));
    SizingResult r = required_public_rental(in);
    if (!r.ok)
      throw ParseError{r.error == SizingError::Infeasible
                           ? "cluster sizing infeasible for the given ratios"
                           : "cluster needs either P or a sizing method"};
    cfg.public_size = r.nodes;
    // the caller asked for m Byzantine nodes to be tolerated; keep it
  }
  return cfg;
}

Scenario parse_scenario_inner(const json& j) {
  if (!j.is_object()) throw ParseError{"scenario must be a JSON object"};
  Scenario sc;
  if (!j.contains("cluster")) throw ParseError{"missing cluster"};
  sc.cluster = parse_cluster(j["cluster"]);
  sc.initial_mode = get_mode(j, "mode", Mode::Lion);
  if (j.contains("workload")) {
    const json& w = j["workload"];
    sc.workload.clients = uint32_t(get_u64(w, "clients", 1));
    sc.workload.requests_per_client =
        uint32_t(get_u64(w, "requests_per_client", 10));
    sc.workload.put_ratio = get_f64(w, "put_ratio", 1.0);
  }
  if (j.contains("delay")) {
    const json& d = j["delay"];
    sc.delay.base = get_u64(d, "base", 1);
    sc.delay.gst = get_u64(d, "gst", 0);
    sc.delay.pre_gst_cap = get_u64(d, "pre_gst_cap", sc.delay.base);
    sc.delay.pre_gst_drop = get_f64(d, "pre_gst_drop", 0.0);
  }
  if (j.contains("faults")) {
    const json& f = j["faults"];
    if (f.contains("crashes"))
      for (const json& c : f["crashes"]) {
        CrashDirective d;
        d.replica = ReplicaId(get_u64(c, "replica", 0));
        d.at = get_u64(c, "at", 0);
        d.restart_at = get_u64(c, "restart_at", 0);
        sc.faults.crashes.push_back(d);
      }
    if (f.contains("byzantine"))
      for (const json& b : f["byzantine"]) {
        ByzDirective d;
        d.replica = ReplicaId(get_u64(b, "replica", 0));
        d.at = get_u64(b, "at", 0);
        std::string name = b.value("strategy", "none");
        auto s = byz_strategy_from_name(name);
        if (!s) throw ParseError{"unknown byzantine strategy: " + name};
        d.strategy = *s;
        sc.faults.byzantine.push_back(d);
      }
  }
  if (j.contains("mode_changes"))
    for (const json& m : j["mode_changes"]) {
      ModeSwitch ms;
      ms.at = get_u64(m, "at", 0);
      ms.target = get_mode(m, "target", Mode::Lion);
      sc.mode_changes.push_back(ms);
    }
  sc.replica_opts.checkpoint_period = get_u64(j, "checkpoint_period", 10);
  sc.replica_opts.watch_timeout = get_u64(j, "watch_timeout", 8);
  sc.client_opts.retry_timeout =
      get_u64(j, "client_timeout", 4 * sc.replica_opts.watch_timeout);
  sc.max_time = get_u64(j, "max_time", 200000);
  sc.seed = get_u64(j, "seed", 1);
  if (j.contains("hooks"))
    sc.hooks.accept_quorum_delta =
        int(j["hooks"].value("accept_quorum_delta", 0));
  return sc;
}

}  // namespace

std::variant<Scenario, std::string> scenario_from_json(const json& j) {
  try {
    return parse_scenario_inner(j);
  } catch (const ParseError& e) {
    return e.what;
  } catch (const json::exception& e) {
    return std::string(e.what());
  }
}

std::variant<Scenario, std::string> load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) return "cannot open " + path;
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) return "invalid JSON in " + path;
  return scenario_from_json(j);
}

json scenario_to_json(const Scenario& sc) {
  json j;
  j["cluster"] = {{"S", sc.cluster.private_size},
                  {"P", sc.cluster.public_size},
                  {"c", sc.cluster.crash_bound},
                  {"m", sc.cluster.byz_bound}};
  j["mode"] = mode_name(sc.initial_mode);
  j["workload"] = {{"clients", sc.workload.clients},
                   {"requests_per_client", sc.workload.requests_per_client},
                   {"put_ratio", sc.workload.put_ratio}};
  j["delay"] = {{"base", sc.delay.base},
                {"gst", sc.delay.gst},
                {"pre_gst_cap", sc.delay.pre_gst_cap},
                {"pre_gst_drop", sc.delay.pre_gst_drop}};
  json crashes = json::array();
  for (const CrashDirective& d : sc.faults.crashes)
    crashes.push_back({{"replica", d.replica},
                       {"at", d.at},
                       {"restart_at", d.restart_at}});
  json byz = json::array();
  for (const ByzDirective& d : sc.faults.byzantine)
    byz.push_back({{"replica", d.replica},
                   {"at", d.at},
                   {"strategy", byz_strategy_name(d.strategy)}});
  j["faults"] = {{"crashes", crashes}, {"byzantine", byz}};
  json mcs = json::array();
  for (const ModeSwitch& m : sc.mode_changes)
    mcs.push_back({{"at", m.at}, {"target", mode_name(m.target)}});
  j["mode_changes"] = mcs;
  j["checkpoint_period"] = sc.replica_opts.checkpoint_period;
  j["watch_timeout"] = sc.replica_opts.watch_timeout;
  j["client_timeout"] = sc.client_opts.retry_timeout;
  j["max_time"] = sc.max_time;
  j["seed"] = sc.seed;
  if (sc.hooks.accept_quorum_delta != 0)
    j["hooks"] = {{"accept_quorum_delta", sc.hooks.accept_quorum_delta}};
  return j;
}

std::variant<SweepConfig, std::string> load_sweep(const std::string& path) {
  std::ifstream f(path);
  if (!f) return "cannot open " + path;
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) return "invalid JSON in " + path;
  try {
    SweepConfig cfg;
    if (!j.contains("base")) return std::string("missing base scenario");
    auto base = scenario_from_json(j["base"]);
    if (auto* err = std::get_if<std::string>(&base)) return *err;
    cfg.base = std::get<Scenario>(base);
    if (!j.contains("cells") || !j["cells"].is_array())
      return std::string("missing cells array");
    for (const json& c : j["cells"]) {
      SweepCell cell;
      cell.cluster = parse_cluster(c);
      cell.mode = get_mode(c, "mode", cfg.base.initial_mode);
      cell.clients = uint32_t(get_u64(c, "clients", 0));
      cfg.cells.push_back(cell);
    }
    if (j.contains("seeds"))
      for (const json& s : j["seeds"]) cfg.seeds.push_back(s.get<uint64_t>());
    if (cfg.seeds.empty()) cfg.seeds.push_back(cfg.base.seed);
    return cfg;
  } catch (const ParseError& e) {
    return e.what;
  } catch (const json::exception& e) {
    return std::string(e.what());
  }
}

std::string run_sweep(const SweepConfig& cfg) {
  std::ostringstream os;
  os << "S,P,c,m,mode,clients,seed,completed,requests,duration,"
        "total_messages,view_changes,audit_ok,throughput\n";
  for (const SweepCell& cell : cfg.cells) {
    for (uint64_t seed : cfg.seeds) {
      Scenario sc = cfg.base;
      sc.cluster = cell.cluster;
      sc.initial_mode = cell.mode;
      if (cell.clients > 0) sc.workload.clients = cell.clients;
      sc.seed = seed;
      if (auto err = sc.validate())
        throw std::runtime_error("sweep cell invalid (S=" +
                                 std::to_string(cell.cluster.private_size) +
                                 ", mode=" + mode_name(cell.mode) +
                                 "): " + *err);
      RunResult r = run_scenario(sc);
      os << sc.cluster.private_size << ',' << sc.cluster.public_size << ','
         << sc.cluster.crash_bound << ',' << sc.cluster.byz_bound << ','
         << mode_name(sc.initial_mode) << ',' << sc.workload.clients << ','
         << seed << ',' << (r.all_completed ? 1 : 0) << ','
         << r.metrics.requests.size() << ',' << r.metrics.duration << ','
         << r.metrics.total_messages << ','
         << r.metrics.view_changes.size() << ',' << (r.audit.ok ? 1 : 0)
         << ',' << r.metrics.throughput() << '\n';
    }
  }
  return os.str();
}

}  // namespace seemore
