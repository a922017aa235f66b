#include "capex/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "capex/divergence.hpp"
#include "capex/errors.hpp"

namespace capex {

std::vector<double> ReferenceSpec::distribution(const VariableSpec& outcome,
                                                const Instantiation& command) const {
  auto it = outcomes.find(outcome.name);
  if (it == outcomes.end()) {
    throw ConfigError("reference has no rule for outcome '" + outcome.name + "'");
  }
  const ReferenceRule& rule = it->second;
  std::vector<double> dist(outcome.cardinality(), 0.0);
  switch (rule.kind) {
    case ReferenceRule::Kind::kEqualsCommand: {
      const std::string& commanded = command.at(rule.command_var);
      auto idx = outcome.find(commanded);
      if (!idx) {
        throw ConfigError("commanded value '" + commanded + "' is not an outcome of '" +
                          outcome.name + "'");
      }
      dist[*idx] = 1.0;
      return dist;
    }
    case ReferenceRule::Kind::kPointMass:
      dist[outcome.index_of(rule.value)] = 1.0;
      return dist;
    case ReferenceRule::Kind::kTable: {
      auto row = rule.table.find(command.key());
      if (row == rule.table.end()) {
        throw ConfigError("reference for '" + outcome.name + "' does not cover command '" +
                          command.key() + "'");
      }
      if (row->second.size() != outcome.cardinality()) {
        throw ConfigError("reference row for '" + outcome.name + "' has the wrong length");
      }
      return row->second;
    }
  }
  return dist;
}

void ReferenceSpec::validate(const NetworkStructure& structure) const {
  const auto commands = enumerate_instantiations(structure.with_role(Role::kCommand));
  for (const auto& o : structure.with_role(Role::kOutcome)) {
    for (const auto& c : commands) validate_probability(distribution(o, c));
  }
}

double mismatch(const ModelState& model, const ReferenceSpec& ref, const Instantiation& context) {
  const auto& structure = model.structure;
  validate_instantiation(context, structure.with_role(Role::kContext), /*require_all=*/true);
  const auto commands = enumerate_instantiations(structure.with_role(Role::kCommand));
  const auto outcomes = structure.with_role(Role::kOutcome);

  double total = 0.0;
  for (const auto& command : commands) {
    const Instantiation situation = context.merged(command);
    for (const auto& o : outcomes) {
      const auto learned =
          posterior_mean(model.cpt(o.name), situation_index(structure, o.name, situation));
      const double d = kl_divergence(ref.distribution(o, command), learned);
      if (std::isinf(d)) return kInfiniteDivergence;
      total += d;
    }
  }
  return total / double(commands.size());
}

double score_from_mismatch(double m) {
  if (std::isinf(m)) return 0.0;
  return 1.0 / (1.0 + m);
}

double score(const ModelState& model, const ReferenceSpec& ref, const Instantiation& context) {
  return score_from_mismatch(mismatch(model, ref, context));
}

ScoreReport favourable_contexts(const ModelState& model, const ReferenceSpec& ref,
                                double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("score threshold must lie in [0, 1]");
  }
  ScoreReport report;
  report.threshold = threshold;
  for (const auto& ctx : enumerate_instantiations(model.structure.with_role(Role::kContext))) {
    ScoreRow row;
    row.context = ctx;
    row.mismatch = mismatch(model, ref, ctx);
    row.score = score_from_mismatch(row.mismatch);
    row.favourable = row.score > threshold;
    report.rows.push_back(std::move(row));
  }
  std::vector<const ScoreRow*> picked;
  for (const auto& r : report.rows) {
    if (r.favourable) picked.push_back(&r);
  }
  std::stable_sort(picked.begin(), picked.end(),
                   [](const ScoreRow* a, const ScoreRow* b) { return a->score > b->score; });
  for (const auto* r : picked) report.favourable.push_back(r->context);
  return report;
}

std::string render_table(const ScoreReport& report) {
  std::vector<std::string> columns;
  if (!report.rows.empty()) {
    for (const auto& [name, _] : report.rows.front().context) columns.push_back(name);
  }
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = columns;
  header.insert(header.end(), {"mismatch", "score", "favourable"});
  cells.push_back(header);
  for (const auto& r : report.rows) {
    std::vector<std::string> line;
    for (const auto& c : columns) line.push_back(r.context.at(c));
    std::ostringstream m, s;
    if (std::isinf(r.mismatch)) {
      m << "inf";
    } else {
      m << std::fixed << std::setprecision(6) << r.mismatch;
    }
    s << std::fixed << std::setprecision(6) << r.score;
    line.push_back(m.str());
    line.push_back(s.str());
    line.push_back(r.favourable ? "yes" : "no");
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream out;
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) out << "  ";
      if (i + 1 == line.size()) {
        out << line[i];
      } else {
        out << std::left << std::setw(int(width[i])) << line[i];
      }
    }
    out << '\n';
  }
  out << "threshold " << report.threshold << ", " << report.favourable.size() << " favourable of "
      << report.rows.size() << " contexts\n";
  return out.str();
}

}  // namespace capex
