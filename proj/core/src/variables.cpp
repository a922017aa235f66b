#include "capex/variables.hpp"

#include <algorithm>
#include <set>

#include "capex/errors.hpp"

namespace capex {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kContext: return "context";
    case Role::kCommand: return "command";
    case Role::kOutcome: return "outcome";
    case Role::kAttribute: return "attribute";
  }
  return "unknown";
}

Role role_from_string(std::string_view text) {
  if (text == "context") return Role::kContext;
  if (text == "command") return Role::kCommand;
  if (text == "outcome") return Role::kOutcome;
  if (text == "attribute") return Role::kAttribute;
  throw InvalidVariable("unknown variable role '" + std::string(text) + "'");
}

namespace {

bool has_reserved_chars(std::string_view s) {
  return s.find_first_of(";=") != std::string_view::npos;
}

}  // namespace

void VariableSpec::validate() const {
  if (name.empty()) throw InvalidVariable("variable name is empty");
  if (has_reserved_chars(name)) {
    throw InvalidVariable("variable name '" + name + "' contains ';' or '='");
  }
  if (domain.size() < 2) {
    throw InvalidVariable("variable '" + name + "' needs at least two domain values");
  }
  std::set<std::string_view> seen;
  for (const auto& value : domain) {
    if (value.empty() || has_reserved_chars(value)) {
      throw InvalidVariable("variable '" + name + "' has an invalid domain value '" + value + "'");
    }
    if (!seen.insert(value).second) {
      throw InvalidVariable("variable '" + name + "' has duplicate domain value '" + value + "'");
    }
  }
  if (role == Role::kCommand && !controllable) {
    throw InvalidVariable("command variable '" + name + "' must be controllable");
  }
}

std::optional<std::size_t> VariableSpec::find(std::string_view value) const {
  auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

std::size_t VariableSpec::index_of(std::string_view value) const {
  if (auto idx = find(value)) return *idx;
  throw OutOfDomain("value '" + std::string(value) + "' is not in the domain of '" + name + "'");
}

const std::string& Instantiation::at(std::string_view name) const {
  auto it = bindings_.find(name);
  if (it == bindings_.end()) {
    throw MissingBinding("variable '" + std::string(name) + "' is not bound");
  }
  return it->second;
}

std::optional<std::string> Instantiation::get(std::string_view name) const {
  auto it = bindings_.find(name);
  if (it == bindings_.end()) return std::nullopt;
  return it->second;
}

bool Instantiation::erase(std::string_view name) {
  auto it = bindings_.find(name);
  if (it == bindings_.end()) return false;
  bindings_.erase(it);
  return true;
}

Instantiation Instantiation::restricted_to(std::span<const std::string> names) const {
  Instantiation out;
  for (const auto& n : names) {
    if (auto it = bindings_.find(n); it != bindings_.end()) out.bindings_.insert(*it);
  }
  return out;
}

Instantiation Instantiation::restricted_to(std::span<const VariableSpec> vars) const {
  Instantiation out;
  for (const auto& v : vars) {
    if (auto it = bindings_.find(v.name); it != bindings_.end()) out.bindings_.insert(*it);
  }
  return out;
}

Instantiation Instantiation::merged(const Instantiation& other) const {
  Instantiation out = *this;
  for (const auto& [k, v] : other.bindings_) out.bindings_[k] = v;
  return out;
}

std::string Instantiation::key() const {
  std::string out;
  for (const auto& [k, v] : bindings_) {
    if (!out.empty()) out.push_back(';');
    out += k;
    out.push_back('=');
    out += v;
  }
  return out;
}

Instantiation Instantiation::parse_key(std::string_view key) {
  Instantiation out;
  while (!key.empty()) {
    auto end = key.find(';');
    auto item = key.substr(0, end);
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("malformed instantiation key '" + std::string(item) + "'");
    }
    out.set(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (end == std::string_view::npos) break;
    key.remove_prefix(end + 1);
  }
  return out;
}

void validate_instantiation(const Instantiation& inst, std::span<const VariableSpec> vars,
                            bool require_all) {
  for (const auto& [name, value] : inst) {
    auto it = std::find_if(vars.begin(), vars.end(),
                           [&](const VariableSpec& v) { return v.name == name; });
    if (it == vars.end()) throw MissingBinding("unknown variable '" + name + "'");
    it->index_of(value);
  }
  if (require_all) {
    for (const auto& v : vars) {
      if (!inst.contains(v.name)) throw MissingBinding("variable '" + v.name + "' is not bound");
    }
  }
}

std::size_t joint_cardinality(std::span<const VariableSpec> vars) {
  std::size_t n = 1;
  for (const auto& v : vars) {
    if (v.domain.empty()) throw InvalidVariable("variable '" + v.name + "' has an empty domain");
    n *= v.domain.size();
  }
  return n;
}

std::vector<Instantiation> enumerate_instantiations(std::span<const VariableSpec> vars) {
  const std::size_t n = joint_cardinality(vars);
  std::vector<Instantiation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(instantiation_at(vars, i));
  return out;
}

std::size_t mixed_radix_index(std::span<const VariableSpec> vars, const Instantiation& inst) {
  std::size_t index = 0;
  for (const auto& v : vars) {
    index = index * v.domain.size() + v.index_of(inst.at(v.name));
  }
  return index;
}

Instantiation instantiation_at(std::span<const VariableSpec> vars, std::size_t index) {
  if (index >= joint_cardinality(vars)) {
    throw OutOfDomain("instantiation index " + std::to_string(index) + " out of range");
  }
  Instantiation::Map bindings;
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
    const std::size_t k = it->domain.size();
    bindings.emplace(it->name, it->domain[index % k]);
    index /= k;
  }
  return Instantiation(std::move(bindings));
}

}  // namespace capex
