#include <iomanip>
#include <sstream>

#include "amg/harness/harness.hpp"

namespace amg::harness {

namespace {

std::string fixed2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::string general(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

/// Columns padded to their widest cell; the first column is left-aligned.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) out << std::left;
      else out << std::right;
      out << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace

nlohmann::json eval_to_json(const EvalResult& r) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : r.per_file) {
    std::vector<std::string> actions;
    for (auto a : f.actions) actions.emplace_back(mods::action_name(a));
    files.push_back({{"id", f.id},
                     {"excluded", f.excluded},
                     {"evaded", f.evaded},
                     {"steps", f.steps},
                     {"original_size", f.original_size},
                     {"delta_bytes", f.delta_bytes},
                     {"actions", actions}});
  }
  return {{"evasion_rate", r.evasion_rate},
          {"size_increase", r.size_increase},
          {"evaded", r.evaded},
          {"total", r.total},
          {"excluded", r.excluded},
          {"per_file", files}};
}

nlohmann::json report_to_json(const WorkflowReport& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"max_steps", s.max_steps},
                     {"evasion_rate", s.evasion_rate},
                     {"size_increase", s.size_increase},
                     {"chosen", s.chosen}});
  }
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : r.grid) {
    grid.push_back({{"alpha", g.alpha}, {"gamma", g.gamma}, {"best_mean_reward", g.best_mean_reward}, {"kept", g.kept}});
  }
  nlohmann::json val = nlohmann::json::array();
  for (const auto& v : r.validation) {
    val.push_back({{"alpha", v.alpha},
                   {"gamma", v.gamma},
                   {"evasion_rate", v.evasion_rate},
                   {"size_increase", v.size_increase},
                   {"chosen", v.chosen}});
  }
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& m : r.metrics) {
    nlohmann::json row = {{"iteration", m.iteration},
                          {"episodes", m.episodes},
                          {"mean_episode_reward", m.mean_episode_reward},
                          {"train_evasion_rate", m.train_evasion_rate}};
    if (m.evasion_rate_on_val) row["evasion_rate_on_val"] = *m.evasion_rate_on_val;
    metrics.push_back(row);
  }
  return {{"algorithm", agents::algorithm_name(r.algorithm)},
          {"max_steps", r.max_steps},
          {"alpha", r.alpha},
          {"gamma", r.gamma},
          {"step_selection", "lexicographic: highest validation evasion rate, then lowest size increase"},
          {"steps", steps},
          {"grid", grid},
          {"validation", val},
          {"metrics", metrics},
          {"test", eval_to_json(r.test)},
          {"random_test", eval_to_json(r.random_test)}};
}

std::string report_tables(const WorkflowReport& r) {
  const std::string name = agents::algorithm_name(r.algorithm);
  std::ostringstream out;
  if (!r.steps.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : r.steps) {
      rows.push_back({std::to_string(s.max_steps) + (s.chosen ? " *" : ""), fixed2(s.evasion_rate),
                      fixed2(s.size_increase)});
    }
    out << "max steps sweep (validation, default parameters)\n"
        << table({"max steps", "evasion rate [%]", "size increase [%]"}, rows) << '\n';
  }
  if (!r.grid.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& g : r.grid) {
      rows.push_back({general(g.alpha), general(g.gamma), fixed2(g.best_mean_reward), g.kept ? "yes" : ""});
    }
    out << "grid search (short training)\n"
        << table({"alpha", "gamma", "best mean episode reward", "kept"}, rows) << '\n';
  }
  if (!r.validation.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& v : r.validation) {
      rows.push_back({name + (v.chosen ? " *" : ""), std::to_string(r.max_steps), general(v.alpha), general(v.gamma),
                      fixed2(v.evasion_rate), fixed2(v.size_increase)});
    }
    out << "validation\n"
        << table({"agent", "max steps", "alpha", "gamma", "evasion rate [%]", "size increase [%]"}, rows) << '\n';
  }
  std::vector<std::vector<std::string>> rows;
  rows.push_back({name, fixed2(r.test.evasion_rate), fixed2(r.test.size_increase)});
  if (r.algorithm != agents::Algorithm::Random) {
    rows.push_back({"random", fixed2(r.random_test.evasion_rate), fixed2(r.random_test.size_increase)});
  }
  out << "test (max steps " << r.max_steps << ")\n"
      << table({"agent", "evasion rate [%]", "size increase [%]"}, rows);
  return out.str();
}

std::string transfer_table(const std::string& agent, const TransferPair& t) {
  return table({"agent", "files", "evasion vs A [%]", "evasion vs B [%]"},
               {{agent, std::to_string(t.files), fixed2(t.rate_a), fixed2(t.rate_b)}});
}

}  // namespace amg::harness
