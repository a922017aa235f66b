#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "capex/active_learner.hpp"
#include "capex/learn_loop.hpp"
#include "capex/network.hpp"
#include "capex/refinement.hpp"
#include "capex/scoring.hpp"
#include "capex/subject_sim.hpp"

namespace capex {

using nlohmann::json;

// Persistence schemas. Doubles are written as JSON numbers, which nlohmann
// prints in shortest round-trip form, so save/load is exact.

void to_json(json& j, const Instantiation& inst);
void from_json(const json& j, Instantiation& inst);

void to_json(json& j, const VariableSpec& v);
void from_json(const json& j, VariableSpec& v);

void to_json(json& j, const NetworkStructure& s);
void from_json(const json& j, NetworkStructure& s);

// {variables, parents, cpt_rows, situation_weights, prior, rng_seed}
void to_json(json& j, const ModelState& m);
void from_json(const json& j, ModelState& m);

void to_json(json& j, const ObservationRecord& r);
void from_json(const json& j, ObservationRecord& r);

// ModelState fields plus {query_vars, uncontrolled, history}
void to_json(json& j, const LearnerState& s);
void from_json(const json& j, LearnerState& s);

void to_json(json& j, const AttributeStats& s);
void from_json(const json& j, AttributeStats& s);

void to_json(json& j, const RefinementConfig& c);
void from_json(const json& j, RefinementConfig& c);

void to_json(json& j, const ReferenceSpec& r);
void from_json(const json& j, ReferenceSpec& r);

void to_json(json& j, const ScoreReport& r);

void to_json(json& j, const TraceRecord& r);
void from_json(const json& j, TraceRecord& r);

void to_json(json& j, const Proposal& p);

// Shortest decimal that parses back to the same double.
std::string format_double(double x);

// CSV trace: iteration, mode, query, situation, attributes, outcome,
// model_error, kl_to_truth, promoted_vars. Instantiations use key() form.
std::string trace_csv_header();
std::string trace_csv_row(const TraceRecord& r);
std::string trace_csv(std::span<const TraceRecord> trace);
std::string trace_jsonl(std::span<const TraceRecord> trace);

json read_json_file(const std::filesystem::path& path);

// Writes via a temporary sibling, fsync and rename, so readers never see a
// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace capex
