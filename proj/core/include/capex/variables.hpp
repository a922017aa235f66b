#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capex {

enum class Role { kContext, kCommand, kOutcome, kAttribute };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

// A named categorical variable. Domain order is fixed once the variable is
// part of a model: value indices are stable and used for CPT addressing.
struct VariableSpec {
  std::string name;
  std::vector<std::string> domain;
  Role role = Role::kContext;
  bool controllable = false;

  // Throws InvalidVariable if the domain has fewer than two values, contains
  // duplicates, or a command is not controllable.
  void validate() const;

  // Index of `value` in the domain; throws OutOfDomain when absent.
  std::size_t index_of(std::string_view value) const;
  std::optional<std::size_t> find(std::string_view value) const;
  std::size_t cardinality() const { return domain.size(); }

  bool is_situation() const { return role == Role::kContext || role == Role::kCommand; }

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

// Assignment of values to a set of variables, keyed by variable name.
// Iteration order is by name, which gives every instantiation a canonical
// textual key regardless of how it was built.
class Instantiation {
 public:
  using Map = std::map<std::string, std::string, std::less<>>;

  Instantiation() = default;
  Instantiation(std::initializer_list<Map::value_type> bindings) : bindings_(bindings) {}
  explicit Instantiation(Map bindings) : bindings_(std::move(bindings)) {}

  void set(std::string name, std::string value) { bindings_[std::move(name)] = std::move(value); }
  bool contains(std::string_view name) const { return bindings_.find(name) != bindings_.end(); }
  // Throws MissingBinding when `name` is unbound.
  const std::string& at(std::string_view name) const;
  std::optional<std::string> get(std::string_view name) const;
  bool erase(std::string_view name);

  std::size_t size() const { return bindings_.size(); }
  bool empty() const { return bindings_.empty(); }
  const Map& bindings() const { return bindings_; }
  auto begin() const { return bindings_.begin(); }
  auto end() const { return bindings_.end(); }

  // Subset of bindings for the named variables that are present.
  Instantiation restricted_to(std::span<const std::string> names) const;
  Instantiation restricted_to(std::span<const VariableSpec> vars) const;
  // Union; bindings in `other` win on conflict.
  Instantiation merged(const Instantiation& other) const;

  // "A=x;B=y" in name order; the empty instantiation renders as "".
  std::string key() const;
  static Instantiation parse_key(std::string_view key);

  friend bool operator==(const Instantiation&, const Instantiation&) = default;
  friend auto operator<=>(const Instantiation& a, const Instantiation& b) {
    return a.bindings_ <=> b.bindings_;
  }

 private:
  Map bindings_;
};

// Checks every binding names a known variable and holds an in-domain value.
// `require_all` additionally demands that every variable is bound.
void validate_instantiation(const Instantiation& inst, std::span<const VariableSpec> vars,
                            bool require_all);

// Number of joint instantiations (product of domain sizes).
std::size_t joint_cardinality(std::span<const VariableSpec> vars);

// All joint instantiations in mixed-radix order, last variable fastest.
std::vector<Instantiation> enumerate_instantiations(std::span<const VariableSpec> vars);

// Mixed-radix index of `inst` over `vars` (declared order, last fastest).
// Throws MissingBinding when a variable is unbound.
std::size_t mixed_radix_index(std::span<const VariableSpec> vars, const Instantiation& inst);

// Inverse of mixed_radix_index.
Instantiation instantiation_at(std::span<const VariableSpec> vars, std::size_t index);

}  // namespace capex
