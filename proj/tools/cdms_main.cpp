// cdms: context data management simulator CLI.
//
// Subcommands: sim-run (experiment harness, fig3/fig5/fig6 CSVs), query
// (run one query against a saved world), schema-review (administrator
// confirmation of pending attribute matches), schema-dump (publish the
// global schemas), world-inspect, report.
//
// stdout carries machine-readable output (CSV); diagnostics go to stderr.
// Exit codes: 0 success, 2 user error, 1 internal invariant failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "cdms/snapshot.hpp"

namespace fs = std::filesystem;
using namespace cdms;

namespace {

int parse_ttl_range(const std::string& text, int& lo, int& hi) {
  auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, dots));
      hi = std::stoi(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    return -1;
  }
  return (lo >= 1 && hi >= lo) ? 0 : -1;
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) sizes.push_back(std::stoi(item));
  return sizes;
}

std::string csv_cell(const std::optional<AttributeValue>& v) {
  if (!v) return "";
  std::string s = v->display();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void print_result_csv(const simnet::QueryRun& run, const std::vector<std::string>& projection,
                      bool subscription) {
  std::cout << "query_id,peer";
  if (subscription) {
    std::cout << "," << (projection.empty() ? "event" : projection[0]) << ",timestamp_ms\n";
    for (const auto& n : run.notifies)
      std::cout << n.query_id << "," << n.peer.address << ","
                << (n.event_value ? "true" : "false") << "," << n.timestamp_ms << "\n";
    return;
  }
  for (const auto& name : projection) std::cout << "," << name;
  std::cout << "\n";
  for (const auto& r : run.results) {
    std::cout << r.query_id << "," << r.peer.address;
    for (const auto& cell : r.tuple) std::cout << "," << csv_cell(cell.value);
    std::cout << "\n";
  }
}

void print_timing(const engine::PhaseTiming& timing) {
  std::cerr << "phase,sim_ms\n";
  for (const auto& [label, ms] : timing.spans) {
    char buf[40];
    snprintf(buf, sizeof buf, "%.6f", ms);
    std::cerr << label << "," << buf << "\n";
  }
}

std::uint64_t effective_seed(std::uint64_t flag_seed, bool seed_given,
                             std::uint64_t config_seed) {
  if (const char* env = std::getenv("CDMS_SEED")) return std::stoull(env);
  return seed_given ? flag_seed : config_seed;
}

// scripted world changes, relative sim time:
//   `t_ms peer_address attribute value` or `t_ms peer_address - leave`
void load_script(simnet::SimWorld& world, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CdmsError("cannot open script " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double t;
    std::string address, attr;
    if (!(row >> t >> address >> attr)) {
      if (line.find_first_not_of(" \t\r\n") != std::string::npos)
        throw CdmsError("script line " + std::to_string(lineno) +
                        ": expected `t addr attr value`");
      continue;
    }
    PeerId target;
    bool found = false;
    for (const auto& [peer, psg] : world.psgs)
      if (peer.address == address) {
        target = peer;
        found = true;
      }
    if (!found)
      throw CdmsError("script line " + std::to_string(lineno) + ": unknown peer " + address);
    std::string rest;
    std::getline(row, rest);
    auto first = rest.find_first_not_of(" \t");
    rest = first == std::string::npos ? "" : rest.substr(first);
    if (attr == "-" && rest == "leave") {
      world.schedule(world.now + t, simnet::ScriptedLeave{target, false});
      continue;
    }
    if (rest.empty())
      throw CdmsError("script line " + std::to_string(lineno) + ": missing value");
    const AttributeDef* def = world.psgs.at(target).profile.schema.find(attr);
    if (!def)
      throw CdmsError("script line " + std::to_string(lineno) + ": unknown attribute " + attr);
    AttributeValue value;
    switch (def->kind) {
      case Kind::Text: value = AttributeValue::text(rest); break;
      case Kind::Number: value = AttributeValue::number(std::stod(rest)); break;
      case Kind::Boolean: value = AttributeValue::boolean(rest == "true"); break;
      case Kind::TextList: {
        std::vector<std::string> items;
        std::stringstream ls(rest);
        std::string item;
        while (std::getline(ls, item, ',')) items.push_back(item);
        value = AttributeValue::text_list(items);
        break;
      }
    }
    world.schedule(world.now + t, simnet::ScriptedSet{target, attr, value});
  }
}

int cmd_sim_run(const std::string& config_path, const std::vector<std::string>& experiments,
                int peers, const std::string& ttl_text, int runs, std::uint64_t seed,
                bool seed_given, const std::string& sizes_text, const std::string& out_dir,
                const std::string& save_world_path, const std::string& trace_path) {
  simnet::SimConfig cfg;
  if (!config_path.empty()) cfg = simnet::load_config(config_path);
  cfg.seed = effective_seed(seed, seed_given, cfg.seed);
  if (peers > 0) cfg.spaces_per_run = peers;
  if (runs > 0) cfg.runs_per_point = runs;
  cfg.validate();

  fs::create_directories(out_dir);

  std::vector<std::string> todo = experiments;
  if (todo.empty()) todo = {"fig3", "fig5", "fig6"};
  for (const auto& experiment : todo) {
    if (experiment == "fig3") {
      auto rows = simnet::registration_breakdown(cfg, cfg.runs_per_point);
      simnet::write_file((fs::path(out_dir) / "fig3.csv").string(), simnet::fig3_csv(rows));
      std::cerr << "fig3.csv written (" << rows.size() << " phases)\n";
    } else if (experiment == "fig5") {
      int lo = 1, hi = 10;
      if (!ttl_text.empty() && parse_ttl_range(ttl_text, lo, hi) != 0)
        throw CdmsError("bad --ttl range: " + ttl_text);
      auto rows = simnet::sweep_ttl(cfg, lo, hi, cfg.runs_per_point);
      simnet::write_file((fs::path(out_dir) / "fig5.csv").string(), simnet::fig5_csv(rows));
      std::cerr << "fig5.csv written (" << rows.size() << " ttl points)\n";
    } else if (experiment == "fig6") {
      std::vector<int> sizes = {200, 400, 600, 800, 1000};
      if (!sizes_text.empty()) sizes = parse_sizes(sizes_text);
      int ttl = cfg.ttl_default;
      if (!ttl_text.empty()) {
        int lo = 0, hi = 0;
        if (parse_ttl_range(ttl_text, lo, hi) != 0 || lo != hi)
          throw CdmsError("fig6 takes a single --ttl value");
        ttl = lo;
      }
      auto rows = simnet::sweep_size(cfg, sizes, ttl, cfg.runs_per_point);
      simnet::write_file((fs::path(out_dir) / "fig6.csv").string(), simnet::fig6_csv(rows));
      std::cerr << "fig6.csv written (" << rows.size() << " sizes)\n";
    } else {
      throw CdmsError("unknown experiment '" + experiment + "' (fig3|fig5|fig6)");
    }
  }

  if (!save_world_path.empty() || !trace_path.empty()) {
    simnet::SimWorld world = simnet::build_world(cfg, /*keep_trace_lines=*/!trace_path.empty());
    if (!save_world_path.empty()) {
      snapshot::save_world(world, save_world_path);
      std::cerr << "world saved to " << save_world_path << " (" << world.psgs.size()
                << " gateways)\n";
    }
    if (!trace_path.empty()) {
      std::string out;
      for (const auto& line : world.trace.lines) out += line + "\n";
      simnet::write_file(trace_path, out);
      std::cerr << "trace written to " << trace_path << " (digest " << world.trace.digest()
                << ")\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"context data management simulator"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("sim-run", "run experiments, write CSV artifacts");
  std::string config_path, ttl_text, sizes_text, out_dir = ".", save_world_path, trace_path;
  std::vector<std::string> experiments;
  int peers = 0, runs = 0;
  std::uint64_t seed = 0;
  sim->add_option("--config", config_path, "key=value config file");
  sim->add_option("--experiment", experiments, "fig3|fig5|fig6 (repeatable; default all)");
  sim->add_option("--peers", peers, "query-cluster size override");
  sim->add_option("--ttl", ttl_text, "ttl or lo..hi range (fig5), single ttl (fig6)");
  sim->add_option("--runs", runs, "runs per sweep point");
  auto* seed_opt = sim->add_option("--seed", seed, "master seed (env CDMS_SEED overrides)");
  sim->add_option("--sizes", sizes_text, "comma-separated cluster sizes (fig6)");
  sim->add_option("--out", out_dir, "artifact directory");
  sim->add_option("--save-world", save_world_path, "write a world snapshot");
  sim->add_option("--trace", trace_path, "write an event trace dump");

  auto* query = app.add_subcommand("query", "run a context query against a saved world");
  std::string world_path, query_text, script_path, query_save;
  int ttl_flag = 0;
  double horizon = 0;
  query->add_option("--world", world_path, "world snapshot")->required();
  query->add_option("--query", query_text, "query string")->required();
  query->add_option("--ttl", ttl_flag, "hop budget override");
  query->add_option("--script", script_path, "scripted value changes: `t addr attr value`");
  query->add_option("--horizon", horizon, "sim-ms horizon for unbounded subscriptions");
  query->add_option("--save-world", query_save, "save the post-query world");

  auto* review = app.add_subcommand("schema-review", "review pending attribute matches");
  std::string review_world, decisions_path, review_out;
  bool accept_all = false, list_only = false;
  review->add_option("--world", review_world, "world snapshot")->required();
  review->add_flag("--list", list_only, "print the queue and exit");
  review->add_flag("--accept-all", accept_all, "confirm every pending candidate");
  review->add_option("--decisions", decisions_path, "file of `local domain.global y|n` lines");
  review->add_option("--out", review_out, "output snapshot (default: rewrite --world)");

  auto* dump = app.add_subcommand("schema-dump", "print the global schemas as templates");
  std::string dump_world;
  dump->add_option("--world", dump_world, "world snapshot")->required();

  auto* inspect = app.add_subcommand("world-inspect", "summarize a world snapshot");
  std::string inspect_world;
  inspect->add_option("--world", inspect_world, "world snapshot")->required();

  auto* report = app.add_subcommand("report", "print experiment CSVs from a directory");
  std::string report_dir = ".";
  report->add_option("--dir", report_dir, "directory holding fig*.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return cmd_sim_run(config_path, experiments, peers, ttl_text, runs, seed,
                         seed_opt->count() > 0, sizes_text, out_dir, save_world_path, trace_path);

    if (query->parsed()) {
      simnet::SimWorld world = snapshot::load_world(world_path);
      if (!script_path.empty()) load_script(world, script_path);
      auto ast = cql::parse(query_text, world.config.ttl_default);
      auto run = simnet::run_query(world, query_text, ttl_flag, horizon);
      print_result_csv(run, ast.projection, ast.kind == cql::QueryKind::Subscribe);
      print_timing(run.metrics.phases);
      if (!query_save.empty()) snapshot::save_world(world, query_save);
      return 0;
    }

    if (review->parsed()) {
      simnet::SimWorld world = snapshot::load_world(review_world);
      auto& queue = world.server.match.review_queue;
      if (list_only) {
        for (const auto& c : queue) std::cout << matcher::dump_queue_line(c) << "\n";
        return 0;
      }
      std::map<std::string, matcher::Decision> wanted;
      auto key = [](const matcher::MatchCandidate& c) {
        return c.local_name + '\x1f' + c.global_domain + "." + c.global_name;
      };
      if (!decisions_path.empty()) {
        std::ifstream in(decisions_path);
        if (!in) throw CdmsError("cannot open decisions file " + decisions_path);
        std::string local, pair, verdict;
        while (in >> local >> pair >> verdict) {
          if (verdict != "y" && verdict != "n")
            throw CdmsError("decision for " + local + " must be y or n");
          wanted[local + '\x1f' + pair] =
              verdict == "y" ? matcher::Decision::Confirm : matcher::Decision::Reject;
        }
      }
      int confirmed = 0, rejected = 0, refused = 0;
      auto pending = queue;  // applying decisions mutates the live queue
      for (const auto& candidate : pending) {
        matcher::Decision decision;
        if (accept_all) {
          decision = matcher::Decision::Confirm;
        } else if (!decisions_path.empty()) {
          auto it = wanted.find(key(candidate));
          if (it == wanted.end()) continue;  // undecided stays pending
          decision = it->second;
        } else {
          std::cerr << candidate.local_name << " -> " << candidate.global_domain << "."
                    << candidate.global_name << "  via " << to_string(candidate.criterion)
                    << "  score " << candidate.score << (candidate.conflict ? "  [conflict]" : "")
                    << "\nconfirm? [y/n] " << std::flush;
          std::string answer;
          if (!std::getline(std::cin, answer)) break;
          decision = (answer == "y" || answer == "Y") ? matcher::Decision::Confirm
                                                      : matcher::Decision::Reject;
        }
        auto outcome = simnet::apply_review_decision(world, candidate, decision);
        if (outcome.refused) {
          ++refused;
          std::cerr << "refused: " << candidate.local_name << " -> " << candidate.global_domain
                    << "." << candidate.global_name << ": " << outcome.reason << "\n";
        } else if (decision == matcher::Decision::Confirm) {
          ++confirmed;
        } else {
          ++rejected;
          std::cerr << "rejected: " << candidate.local_name << " -> " << candidate.global_domain
                    << "." << candidate.global_name << "; " << outcome.rewritten.size()
                    << " mapping(s) rewritten\n";
        }
      }
      std::string out_path = review_out.empty() ? review_world : review_out;
      snapshot::save_world(world, out_path);
      std::cerr << "review: " << confirmed << " confirmed, " << rejected << " rejected, "
                << refused << " refused; " << queue.size() << " still pending; saved "
                << out_path << "\n";
      return 0;
    }

    if (dump->parsed()) {
      simnet::SimWorld world = snapshot::load_world(dump_world);
      for (const auto& g : world.server.globals) {
        LocalSchema as_local{g.domain_name, g.attributes, std::nullopt};
        std::cout << "<!-- " << g.domain_name << ": " << g.member_count
                  << " registered space(s) -->\n"
                  << render_schema_template(as_local);
      }
      return 0;
    }

    if (inspect->parsed()) {
      simnet::SimWorld world = snapshot::load_world(inspect_world);
      std::cout << "gateways," << world.psgs.size() << "\n";
      std::cout << "domains," << world.server.globals.size() << "\n";
      std::cout << "review_queue," << world.server.match.review_queue.size() << "\n";
      std::cout << "query_cluster," << world.query_domain << "." << world.query_attribute << "\n";
      for (const auto& [domain, ring] : world.server.rings) {
        for (const auto& c : ring.clusters)
          std::cout << "cluster," << domain << "." << c.attribute << "," << c.members.size()
                    << "," << (c.head ? c.head->address : "-") << ","
                    << (overlay::connected(c) ? "connected" : "split") << "\n";
        for (const auto& issue : overlay::audit_ring(ring))
          std::cout << "issue," << domain << "." << issue.cluster << "," << issue.what << "\n";
      }
      return 0;
    }

    if (report->parsed()) {
      for (const char* name : {"fig3.csv", "fig5.csv", "fig6.csv"}) {
        fs::path p = fs::path(report_dir) / name;
        if (!fs::exists(p)) continue;
        std::ifstream in(p);
        std::cout << "== " << name << "\n" << in.rdbuf() << "\n";
      }
      return 0;
    }
  } catch (const simnet::QueryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cql::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CdmsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
