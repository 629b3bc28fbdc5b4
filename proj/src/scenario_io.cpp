#include "cm4fq/scenario_io.hpp"

#include <json.hpp>

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace cm4fq {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

Rat rat_field(const json& v, const std::string& where) {
  if (v.is_number_integer()) return Rat(v.get<int64_t>());
  if (v.is_string()) {
    try {
      return parse_rational(v.get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError("bad rational in " + where + ": " + e.what());
    }
  }
  throw ConfigError("expected integer or rational string in " + where);
}

json rat_json(const Rat& r) {
  if (denominator(r) == 1 && numerator(r) >= INT64_MIN && numerator(r) <= INT64_MAX)
    return json(numerator(r).convert_to<int64_t>());
  return json(to_fraction_string(r));
}

LengthLaw parse_length_law(const json& v, const std::string& where) {
  LengthLaw law;
  if (v.is_number_integer()) {
    law.kind = LengthLaw::Kind::Fixed;
    law.fixed = v.get<int64_t>();
    return law;
  }
  if (!v.is_object()) throw ConfigError("length law must be an integer or object in " + where);
  require_keys(v, {"fixed", "uniform", "cycle"}, where + ".length");
  if (v.contains("fixed")) {
    law.kind = LengthLaw::Kind::Fixed;
    law.fixed = v["fixed"].get<int64_t>();
  } else if (v.contains("uniform")) {
    law.kind = LengthLaw::Kind::Uniform;
    auto arr = v["uniform"];
    if (!arr.is_array() || arr.size() != 2)
      throw ConfigError("uniform law needs [lo, hi] in " + where);
    law.lo = arr[0].get<int64_t>();
    law.hi = arr[1].get<int64_t>();
  } else if (v.contains("cycle")) {
    law.kind = LengthLaw::Kind::Cycle;
    for (const auto& x : v["cycle"]) law.cycle.push_back(x.get<int64_t>());
  } else {
    throw ConfigError("length law needs fixed, uniform or cycle in " + where);
  }
  return law;
}

json length_law_json(const LengthLaw& law) {
  switch (law.kind) {
    case LengthLaw::Kind::Fixed: return json{{"fixed", law.fixed}};
    case LengthLaw::Kind::Uniform: return json{{"uniform", {law.lo, law.hi}}};
    case LengthLaw::Kind::Cycle: return json{{"cycle", law.cycle}};
  }
  return {};
}

SourceSpec parse_source(const json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError("source must be an object in " + where);
  if (!v.contains("kind")) throw ConfigError("source without kind in " + where);
  std::string kind = v["kind"].get<std::string>();
  SourceSpec s;
  if (kind == "backlogged") {
    require_keys(v, {"kind", "length"}, where);
    s.kind = SourceSpec::Kind::BackloggedForever;
    s.length = parse_length_law(v.at("length"), where);
  } else if (kind == "deterministic") {
    require_keys(v, {"kind", "packets"}, where);
    s.kind = SourceSpec::Kind::Deterministic;
    for (const auto& p : v.at("packets")) {
      if (!p.is_array() || p.size() != 2)
        throw ConfigError("deterministic packet needs [time, length] in " + where);
      s.packets.emplace_back(rat_field(p[0], where + ".packets"), p[1].get<int64_t>());
    }
  } else if (kind == "iid") {
    require_keys(v, {"kind", "length", "interarrival_us"}, where);
    s.kind = SourceSpec::Kind::Iid;
    s.length = parse_length_law(v.at("length"), where);
    auto arr = v.at("interarrival_us");
    if (!arr.is_array() || arr.size() != 2)
      throw ConfigError("interarrival_us needs [lo, hi] in " + where);
    s.interarrival_lo_us = arr[0].get<int64_t>();
    s.interarrival_hi_us = arr[1].get<int64_t>();
  } else if (kind == "onoff") {
    require_keys(v, {"kind", "length", "intervals"}, where);
    s.kind = SourceSpec::Kind::OnOff;
    s.length = parse_length_law(v.at("length"), where);
    for (const auto& iv : v.at("intervals")) {
      if (!iv.is_array() || iv.size() != 2)
        throw ConfigError("interval needs [start, end] in " + where);
      std::optional<Rat> end;
      if (!(iv[1].is_string() && iv[1].get<std::string>() == "inf"))
        end = rat_field(iv[1], where + ".intervals");
      s.intervals.emplace_back(rat_field(iv[0], where + ".intervals"), end);
    }
  } else {
    throw ConfigError("unknown source kind \"" + kind + "\" in " + where);
  }
  return s;
}

json source_json(const SourceSpec& s) {
  json v;
  switch (s.kind) {
    case SourceSpec::Kind::BackloggedForever:
      v["kind"] = "backlogged";
      v["length"] = length_law_json(s.length);
      break;
    case SourceSpec::Kind::Deterministic: {
      v["kind"] = "deterministic";
      json packets = json::array();
      for (const auto& [t, len] : s.packets) packets.push_back({rat_json(t), len});
      v["packets"] = packets;
      break;
    }
    case SourceSpec::Kind::Iid:
      v["kind"] = "iid";
      v["length"] = length_law_json(s.length);
      v["interarrival_us"] = {s.interarrival_lo_us, s.interarrival_hi_us};
      break;
    case SourceSpec::Kind::OnOff: {
      v["kind"] = "onoff";
      v["length"] = length_law_json(s.length);
      json intervals = json::array();
      for (const auto& [start, end] : s.intervals)
        intervals.push_back({rat_json(start), end ? rat_json(*end) : json("inf")});
      v["intervals"] = intervals;
      break;
    }
  }
  return v;
}

CheckSpec parse_check(const json& v, const std::string& where) {
  if (!v.is_object()) throw ConfigError("check must be an object in " + where);
  require_keys(v, {"kind", "limit", "after", "t0", "t1"}, where);
  CheckSpec c;
  c.kind = v.at("kind").get<std::string>();
  static const std::set<std::string> known = {"work_level_gap", "steady_state", "tag_work_identity",
                                              "worst_case", "cluster_separation",
                                              "isolated_cluster"};
  if (!known.count(c.kind)) throw ConfigError("unknown check kind \"" + c.kind + "\" in " + where);
  if (v.contains("limit")) c.limit = rat_field(v["limit"], where);
  if (v.contains("after")) c.after = rat_field(v["after"], where);
  if (v.contains("t0")) c.t0 = rat_field(v["t0"], where);
  if (v.contains("t1")) c.t1 = rat_field(v["t1"], where);
  return c;
}

json check_json(const CheckSpec& c) {
  json v{{"kind", c.kind}};
  if (c.limit) v["limit"] = rat_json(*c.limit);
  if (c.after) v["after"] = rat_json(*c.after);
  if (c.t0) v["t0"] = rat_json(*c.t0);
  if (c.t1) v["t1"] = rat_json(*c.t1);
  return v;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("scenario root must be an object");
  require_keys(root,
               {"name", "description", "users", "servers", "eligibility", "variant", "delta",
                "max_length", "horizon", "seed", "sample_period", "fluid_epsilon", "trace",
                "checks"},
               "scenario");

  Scenario sc;
  if (root.contains("name")) sc.name = root["name"].get<std::string>();
  if (root.contains("description")) sc.description = root["description"].get<std::string>();

  if (!root.contains("users") || !root["users"].is_array() || root["users"].empty())
    throw ConfigError("scenario needs a non-empty users array");
  int ui = 0;
  for (const auto& uv : root["users"]) {
    std::string where = "users[" + std::to_string(ui) + "]";
    require_keys(uv, {"name", "weight", "sources", "quantum"}, where);
    UserSpec u;
    u.name = uv.contains("name") ? uv["name"].get<std::string>() : "u" + std::to_string(ui);
    if (uv.contains("weight")) u.weight = rat_field(uv["weight"], where + ".weight");
    if (uv.contains("quantum")) u.quantum = rat_field(uv["quantum"], where + ".quantum");
    if (uv.contains("sources")) {
      int si = 0;
      for (const auto& sv : uv["sources"])
        u.sources.push_back(parse_source(sv, where + ".sources[" + std::to_string(si++) + "]"));
    }
    sc.users.push_back(std::move(u));
    ++ui;
  }

  if (!root.contains("servers") || !root["servers"].is_array() || root["servers"].empty())
    throw ConfigError("scenario needs a non-empty servers array");
  int ki = 0;
  for (const auto& kv : root["servers"]) {
    std::string where = "servers[" + std::to_string(ki) + "]";
    require_keys(kv, {"name", "rate"}, where);
    sc.server_names.push_back(kv.contains("name") ? kv["name"].get<std::string>()
                                                  : "s" + std::to_string(ki));
    if (!kv.contains("rate")) throw ConfigError(where + " needs a rate");
    sc.server_rates.push_back(rat_field(kv["rate"], where + ".rate"));
    ++ki;
  }

  if (!root.contains("eligibility")) throw ConfigError("scenario needs an eligibility matrix");
  const auto& ev = root["eligibility"];
  if (!ev.is_array() || ev.size() != sc.users.size())
    throw ConfigError("eligibility needs one row per user");
  sc.matrix = EligibilityMatrix(static_cast<int>(sc.users.size()),
                                static_cast<int>(sc.server_rates.size()));
  for (size_t i = 0; i < ev.size(); ++i) {
    if (!ev[i].is_array() || ev[i].size() != sc.server_rates.size())
      throw ConfigError("eligibility row " + std::to_string(i) + " needs one entry per server");
    for (size_t k = 0; k < ev[i].size(); ++k) {
      int bit = ev[i][k].get<int>();
      if (bit != 0 && bit != 1) throw ConfigError("eligibility entries must be 0 or 1");
      sc.matrix.set(static_cast<int>(i), static_cast<int>(k), bit == 1);
    }
  }

  if (root.contains("variant")) sc.variant = variant_from_string(root["variant"].get<std::string>());
  if (root.contains("delta")) sc.delta = rat_field(root["delta"], "delta");
  if (!root.contains("max_length")) throw ConfigError("scenario needs max_length");
  sc.max_length = root["max_length"].get<int64_t>();
  if (!root.contains("horizon")) throw ConfigError("scenario needs horizon");
  sc.horizon = rat_field(root["horizon"], "horizon");
  if (root.contains("seed")) sc.seed = root["seed"].get<uint64_t>();
  if (root.contains("sample_period")) sc.sample_period = rat_field(root["sample_period"], "sample_period");
  if (root.contains("fluid_epsilon")) sc.fluid_epsilon = root["fluid_epsilon"].get<int64_t>();
  if (root.contains("trace")) {
    std::string mode = root["trace"].get<std::string>();
    if (mode == "events")
      sc.trace_mode = TraceMode::Events;
    else if (mode == "sampled")
      sc.trace_mode = TraceMode::Sampled;
    else
      throw ConfigError("trace must be \"events\" or \"sampled\"");
  }
  if (root.contains("checks")) {
    int ci = 0;
    for (const auto& cv : root["checks"])
      sc.checks.push_back(parse_check(cv, "checks[" + std::to_string(ci++) + "]"));
  }

  try {
    sc.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& sc) {
  json root;
  root["name"] = sc.name;
  if (!sc.description.empty()) root["description"] = sc.description;
  json users = json::array();
  for (const auto& u : sc.users) {
    json uv{{"name", u.name}, {"weight", rat_json(u.weight)}};
    if (u.quantum) uv["quantum"] = rat_json(*u.quantum);
    json sources = json::array();
    for (const auto& s : u.sources) sources.push_back(source_json(s));
    uv["sources"] = sources;
    users.push_back(uv);
  }
  root["users"] = users;
  json servers = json::array();
  for (size_t k = 0; k < sc.server_rates.size(); ++k)
    servers.push_back(json{{"name", server_name(sc, static_cast<int>(k))},
                           {"rate", rat_json(sc.server_rates[k])}});
  root["servers"] = servers;
  json elig = json::array();
  for (int i = 0; i < sc.matrix.n_users(); ++i) {
    json row = json::array();
    for (int k = 0; k < sc.matrix.n_servers(); ++k) row.push_back(sc.matrix.eligible(i, k) ? 1 : 0);
    elig.push_back(row);
  }
  root["eligibility"] = elig;
  root["variant"] = to_string(sc.variant);
  if (sc.delta) root["delta"] = rat_json(*sc.delta);
  root["max_length"] = sc.max_length;
  root["horizon"] = rat_json(sc.horizon);
  root["seed"] = sc.seed;
  if (sc.sample_period) root["sample_period"] = rat_json(*sc.sample_period);
  if (sc.fluid_epsilon) root["fluid_epsilon"] = *sc.fluid_epsilon;
  root["trace"] = sc.trace_mode == TraceMode::Events ? "events" : "sampled";
  json checks = json::array();
  for (const auto& c : sc.checks) checks.push_back(check_json(c));
  root["checks"] = checks;
  return root.dump(2) + "\n";
}

std::string user_name(const Scenario& sc, int user) {
  if (user >= 0 && user < sc.n_users() && !sc.users[user].name.empty()) return sc.users[user].name;
  return "u" + std::to_string(user);
}

std::string server_name(const Scenario& sc, int server) {
  if (server >= 0 && server < static_cast<int>(sc.server_names.size()) &&
      !sc.server_names[server].empty())
    return sc.server_names[server];
  return "s" + std::to_string(server);
}

int user_index(const Scenario& sc, const std::string& name) {
  for (int i = 0; i < sc.n_users(); ++i)
    if (user_name(sc, i) == name) return i;
  try {
    size_t pos = 0;
    int idx = std::stoi(name, &pos);
    if (pos == name.size() && idx >= 0 && idx < sc.n_users()) return idx;
  } catch (...) {
  }
  throw ConfigError("unknown user \"" + name + "\"");
}

namespace {

void csv_rat(std::ostream& out, const Rat& r) { out << to_decimal_string(r, 12); }

void csv_rat_exact(std::ostream& out, const Rat& r) {
  out << to_decimal_string(r, 12) << ',' << numerator(r).str() << ',' << denominator(r).str();
}

void csv_level(std::ostream& out, const WorkLevel& v) {
  if (v.is_infinite()) {
    out << "inf,inf,inf";
  } else {
    csv_rat_exact(out, v.value());
  }
}

}  // namespace

void write_trace_csv(std::ostream& out, const Scenario& sc, const Trace& trace) {
  out << "time,time_num,time_den,event,server,user,length";
  for (int i = 0; i < trace.n_users; ++i) {
    std::string n = user_name(sc, i);
    out << ",F_" << n << ",F_" << n << "_num,F_" << n << "_den";
  }
  for (int i = 0; i < trace.n_users; ++i) out << ",D_" << user_name(sc, i);
  for (int k = 0; k < trace.n_servers; ++k) {
    std::string n = server_name(sc, k);
    out << ",V_" << n << ",V_" << n << "_num,V_" << n << "_den";
  }
  for (int k = 0; k < trace.n_servers; ++k) out << ",DS_" << server_name(sc, k);
  for (int i = 0; i < trace.n_users; ++i) out << ",W_" << user_name(sc, i);
  out << '\n';

  struct Row {
    const Rat* time;
    int order;  // arrivals, dispatches, completions, then the sample row
    size_t index;
  };
  std::vector<Row> rows;
  for (size_t i = 0; i < trace.arrivals.size(); ++i)
    rows.push_back({&trace.arrivals[i].time, 0, i});
  for (size_t i = 0; i < trace.dispatches.size(); ++i)
    rows.push_back({&trace.dispatches[i].time, 1, i});
  for (size_t i = 0; i < trace.completions.size(); ++i)
    rows.push_back({&trace.completions[i].time, 2, i});
  std::vector<size_t> sample_rows;
  for (size_t i = 0; i < trace.samples.size(); ++i)
    if (trace.samples[i].phase == "post") rows.push_back({&trace.samples[i].time, 3, i});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (*a.time != *b.time) return *a.time < *b.time;
    return a.order < b.order;
  });

  // Each row carries the state of the latest post sample at its time.
  size_t sample_pos = 0;
  const StateSample* current = nullptr;
  for (const Row& row : rows) {
    while (sample_pos < trace.samples.size() && trace.samples[sample_pos].time <= *row.time) {
      if (trace.samples[sample_pos].phase == "post") current = &trace.samples[sample_pos];
      ++sample_pos;
    }
    csv_rat_exact(out, *row.time);
    switch (row.order) {
      case 0: {
        const auto& a = trace.arrivals[row.index];
        out << ",arrival,," << user_name(sc, a.user) << ',' << a.length;
        break;
      }
      case 1: {
        const auto& d = trace.dispatches[row.index];
        out << ",dispatch," << server_name(sc, d.server) << ',' << user_name(sc, d.user) << ','
            << d.length;
        break;
      }
      case 2: {
        const auto& c = trace.completions[row.index];
        out << ",completion," << server_name(sc, c.server) << ',' << user_name(sc, c.user) << ','
            << c.length;
        break;
      }
      default: out << ",sample,,,"; break;
    }
    if (current) {
      for (int i = 0; i < trace.n_users; ++i) {
        out << ',';
        csv_rat_exact(out, current->tags[i]);
      }
      for (int i = 0; i < trace.n_users; ++i) {
        out << ',';
        csv_rat(out, current->user_bonus[i]);
      }
      for (int k = 0; k < trace.n_servers; ++k) {
        out << ',';
        csv_level(out, current->levels[k]);
      }
      for (int k = 0; k < trace.n_servers; ++k) {
        out << ',';
        csv_rat(out, current->server_bonus[k]);
      }
      for (int i = 0; i < trace.n_users; ++i) out << ',' << current->work[i];
    }
    out << '\n';
  }
}

void write_reports_csv(std::ostream& out, const Scenario& sc, const std::vector<BoundReport>& reports) {
  (void)sc;
  out << "check,scope,t0,t1,lhs,relation,rhs,pass,slack\n";
  for (const auto& r : reports) {
    out << r.bound_id << ",\"" << r.scope << "\",";
    csv_rat(out, r.t0);
    out << ',';
    csv_rat(out, r.t1);
    out << ',';
    csv_rat(out, r.lhs);
    out << ',' << r.relation << ',';
    csv_rat(out, r.rhs);
    out << ',' << (r.pass ? "pass" : "FAIL") << ',';
    csv_rat(out, r.slack);
    out << '\n';
  }
}

void write_summary(std::ostream& out, const Scenario& sc, const Trace& trace) {
  out << "scenario: " << sc.name << "\n";
  out << "variant: " << to_string(sc.variant) << "\n";
  out << "horizon: " << to_decimal_string(trace.horizon, 12) << " s\n";
  out << "max work-level gap: " << to_decimal_string(trace.max_work_level_gap, 12) << "\n\n";
  for (const SteadyInterval& iv : steady_intervals(trace)) {
    out << "steady interval [" << to_decimal_string(iv.t0, 12) << ", "
        << to_decimal_string(iv.t1, 12) << ") s, backlogged:";
    if (iv.backlogged.empty()) out << " none";
    for (int i : iv.backlogged) out << ' ' << user_name(sc, i);
    out << "\n";
    for (int i = 0; i < trace.n_users; ++i) {
      int64_t w = trace.work_in(i, iv.t0, iv.t1);
      Rat rate = Rat(w) / (iv.t1 - iv.t0);
      out << "  " << user_name(sc, i) << ": work " << w << " bits, avg rate "
          << to_decimal_string(rate, 12) << " bit/s\n";
    }
  }
  out << "\ntotals:\n";
  for (int i = 0; i < trace.n_users; ++i)
    out << "  " << user_name(sc, i) << ": " << trace.total_work[i] << " bits\n";
}

}  // namespace cm4fq
