#pragma once

#include <map>
#include <string>
#include <vector>

#include "capex/network.hpp"
#include "capex/variables.hpp"

namespace capex {

// Expected behaviour of a subject: for each outcome variable, a distribution
// over its domain given the command. Either an explicit table keyed by
// command instantiation, or one of two intensional rules.
struct ReferenceRule {
  enum class Kind {
    kTable,          // explicit per-command distributions
    kEqualsCommand,  // point mass on the value named like command_var's value
    kPointMass,      // point mass on `value` regardless of the command
  };
  Kind kind = Kind::kTable;
  std::string command_var;                             // kEqualsCommand
  std::string value;                                   // kPointMass
  std::map<std::string, std::vector<double>> table;    // kTable, keyed by command key()

  friend bool operator==(const ReferenceRule&, const ReferenceRule&) = default;
};

struct ReferenceSpec {
  std::map<std::string, ReferenceRule, std::less<>> outcomes;

  // Reference distribution of `outcome` under `command` (bound over the
  // command variables only). Throws ConfigError for an uncovered command.
  std::vector<double> distribution(const VariableSpec& outcome, const Instantiation& command) const;

  // Checks every rule covers every command of `structure` with a valid
  // distribution over the outcome domain.
  void validate(const NetworkStructure& structure) const;

  friend bool operator==(const ReferenceSpec&, const ReferenceSpec&) = default;
};

struct ScoreRow {
  Instantiation context;
  double mismatch = 0.0;  // +inf when some reference mass meets zero model mass
  double score = 0.0;
  bool favourable = false;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;  // every context, enumeration order
  double threshold = 0.5;
  std::vector<Instantiation> favourable;  // descending score, ties by enumeration order
};

// Command-averaged KL(reference || learned) in `context`, summed over outcome
// variables before averaging.
double mismatch(const ModelState& model, const ReferenceSpec& ref, const Instantiation& context);

// 1 / (1 + mismatch); 0 for infinite mismatch.
double score_from_mismatch(double mismatch);
double score(const ModelState& model, const ReferenceSpec& ref, const Instantiation& context);

// Scores every context; favourable rows have score strictly above threshold.
ScoreReport favourable_contexts(const ModelState& model, const ReferenceSpec& ref,
                                double threshold);

// Aligned text table: context columns, mismatch, score, favourable flag.
std::string render_table(const ScoreReport& report);

}  // namespace capex
