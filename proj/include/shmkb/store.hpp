#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shmkb/region.hpp"
#include "shmkb/relation.hpp"

namespace shmkb {

/// Read-only view over a reference list inside the arena. Invalidated by
/// any mutation of the store.
class RefSpan {
 public:
  class iterator {
   public:
    using value_type = RelationId;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    explicit iterator(const std::uint64_t* p) : p_(p) {}
    RelationId operator*() const { return RelationId{*p_}; }
    iterator& operator++() { ++p_; return *this; }
    iterator operator++(int) { auto t = *this; ++p_; return t; }
    bool operator==(const iterator&) const = default;

   private:
    const std::uint64_t* p_ = nullptr;
  };

  RefSpan() = default;
  RefSpan(const std::uint64_t* data, std::size_t size) : data_(data), size_(size) {}

  iterator begin() const { return iterator{data_}; }
  iterator end() const { return iterator{data_ + size_}; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  RelationId operator[](std::size_t i) const { return RelationId{data_[i]}; }
  RelationId front() const { return RelationId{data_[0]}; }
  RelationId back() const { return RelationId{data_[size_ - 1]}; }
  std::vector<RelationId> to_vector() const { return {begin(), end()}; }

 private:
  const std::uint64_t* data_ = nullptr;
  std::size_t size_ = 0;
};

struct NodeInfo {
  std::uint8_t level = 0;
  Code code = Code::Sequence;
  std::uint8_t kind = 0;
  Role role = Role::Plain;
  bool elementary = false;
  bool unique = false;
  bool negative = false;
  bool real = false;
  OrderPolicy policy = OrderPolicy::Chronological;
  std::uint32_t payload = 0;
  std::uint64_t usage = 0;
};

/// Shape parameters for make_relation. Unset level means "highest child level".
struct RelationSpec {
  std::optional<std::uint8_t> level;
  std::uint8_t kind = 0;
  Role role = Role::Plain;
  bool unique = false;  // skip hash-consing; node may be edited in place
  std::uint32_t payload = 0;
};

struct StoreOptions {
  std::size_t initial_bytes = 1 << 20;
  std::size_t cap_bytes = std::size_t{1} << 32;
};

struct StoreStats {
  std::array<std::uint64_t, 4> nodes_per_level{};
  std::uint64_t elementary = 0;
  std::uint64_t level0_aggregates = 0;
  std::uint64_t dead = 0;
  std::uint64_t arena_bytes = 0;
  std::uint64_t usage_total = 0;
};

/// Four-level relation graph in a memory-mapped arena.
///
/// Every node keeps its constituents (inverse references) and the nodes it
/// is a constituent of (direct references); both lists are maintained
/// together so that r is in inverse(p) exactly when p is in direct(r).
/// Non-unique aggregates are hash-consed: re-submitting a shape returns the
/// existing id.
///
/// Not synchronized. Callers serialize writers and may run readers in
/// parallel; the only mutation made by const members is the usage counter,
/// which is updated atomically.
class Store {
 public:
  static constexpr char kMagic[8] = {'S', 'H', 'M', 'K', 'B', '\0', '\1', '\0'};
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit Store(StoreOptions options = {});
  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  static Store load(const std::filesystem::path& path, StoreOptions options = {});
  void snapshot(const std::filesystem::path& path) const;

  // interning
  RelationId intern_char(char32_t codepoint);
  RelationId intern_number(Number value);
  /// Level-0 structure for `text` with greedy longest-prefix convolution.
  RelationId intern_chars(std::u32string_view text);
  /// Level-1 word for UTF-8 `text`; trailing blanks are dropped.
  RelationId intern_word(std::string_view text);
  /// Level-1 word wrapping the number's level-0 aggregate.
  RelationId intern_number_word(Number value);
  std::optional<RelationId> find_word(std::string_view text) const;
  std::optional<RelationId> find_chars(std::u32string_view text) const;

  RelationId make_relation(Code code, std::span<const RelationId> children, RelationSpec spec = {});
  std::optional<RelationId> find_relation(Code code, std::span<const RelationId> children,
                                          RelationSpec spec = {}) const;

  RelationId empty(std::uint8_t level);
  RelationId var_mark();

  // variables, files and other paradigms
  RelationId make_paradigm(std::uint8_t level, std::uint8_t kind, RelationId defining, OrderPolicy policy);
  std::optional<RelationId> find_paradigm(RelationId defining) const;
  void paradigm_insert(RelationId paradigm, RelationId value);
  bool paradigm_erase(RelationId paradigm, RelationId value);
  RelationId paradigm_defining(RelationId paradigm) const;
  std::vector<RelationId> paradigm_values(RelationId paradigm) const;
  bool paradigm_contains(RelationId paradigm, RelationId value) const;
  OrderPolicy paradigm_policy(RelationId paradigm) const;

  /// Variable paradigm for `name` (created on first use). Leading uppercase
  /// makes it global; the trailing sign selects the order policy.
  RelationId variable(std::string_view name);
  std::optional<RelationId> find_variable(std::string_view name) const;
  bool is_variable(RelationId id) const;
  std::string variable_name(RelationId var) const;

  // editing of unique nodes
  void append_child(RelationId parent, RelationId child);
  void insert_child(RelationId parent, std::size_t index, RelationId child);
  void replace_child(RelationId parent, std::size_t index, RelationId child);
  void remove_child(RelationId parent, std::size_t index);
  void set_payload(RelationId id, std::uint32_t payload);

  /// Unlinks a node with no live parents, marks it dead and then removes
  /// constituents left without parents (elementary nodes, paradigms and
  /// `keep` members survive).
  void remove_relation(RelationId id, const std::function<bool(RelationId)>& keep = {});

  // inspection
  NodeInfo info(RelationId id) const;
  bool is_live(RelationId id) const;
  RefSpan inverse_refs(RelationId id) const;
  RefSpan direct_refs(RelationId id) const;
  /// Variable-bearing nodes (variables and anything containing one).
  bool has_variables(RelationId id) const;

  std::optional<Number> number_value(RelationId id) const;
  /// Flattened character text (words, level-0 combinations, numbers).
  std::string text(RelationId id) const;
  std::u32string chars(RelationId id) const;
  /// Total order used by ascending/descending paradigms: numbers before
  /// text, numbers numerically, text by code point, groups element-wise.
  int compare_values(RelationId a, RelationId b) const;
  void touch(RelationId id) const;

  // named roots
  void set_root(const std::string& name, RelationId id);
  void erase_root(const std::string& name);
  std::optional<RelationId> root(const std::string& name) const;
  const std::map<std::string, RelationId>& roots() const { return roots_; }

  void for_each_node(const std::function<void(RelationId)>& fn) const;
  StoreStats stats() const;
  std::size_t arena_bytes() const { return region_.used(); }

  /// Full-traversal check of reference duality and level discipline.
  /// Returns a description of the first violation, empty when consistent.
  std::string check_invariants() const;

  /// Copy of the whole arena used to roll back a failed multi-step write.
  class Checkpoint {
   public:
    Checkpoint() = default;

   private:
    friend class Store;
    std::vector<std::byte> bytes_;
    std::map<std::string, RelationId> roots_;
  };
  Checkpoint checkpoint() const;
  void rollback(const Checkpoint& cp);

 private:
  struct Node;
  struct ShapeKey {
    std::uint8_t level;
    std::uint8_t code;
    std::uint8_t kind;
    std::uint8_t role;
    std::uint8_t flags;
    std::uint32_t payload;
    std::vector<std::uint64_t> children;
    bool operator==(const ShapeKey&) const = default;
  };
  struct ShapeHash {
    std::size_t operator()(const ShapeKey& k) const noexcept;
  };

  Node* node(RelationId id);
  const Node* node(RelationId id) const;
  RelationId allocate_node(std::uint8_t level, Code code, std::uint8_t kind, Role role);
  std::uint64_t allocate_refs(std::uint32_t capacity);
  void free_refs(std::uint64_t offset);
  void push_ref(RelationId owner, bool inverse, RelationId ref);
  void insert_ref(RelationId owner, bool inverse, std::size_t index, RelationId ref);
  bool erase_ref(RelationId owner, bool inverse, RelationId ref);
  void erase_ref_at(RelationId owner, bool inverse, std::size_t index);
  RefSpan refs(std::uint64_t list_offset) const;
  std::size_t count_child(RelationId parent, RelationId child) const;

  ShapeKey shape_key(std::uint8_t level, Code code, const RelationSpec& spec, bool negative, bool real,
                     std::span<const RelationId> children) const;
  ShapeKey shape_key_of(RelationId id) const;
  void index_node(RelationId id);
  void unindex_node(RelationId id);
  void rebuild_indexes();
  void init_fresh();
  RelationId intern_elementary(Role role, std::uint32_t payload);
  RelationId intern_shape(std::uint8_t level, Code code, std::uint8_t kind, Role role, bool negative, bool real,
                          std::span<const RelationId> children, std::uint32_t payload = 0);
  std::size_t ordered_position(RelationId paradigm, RelationId value) const;

  StoreOptions options_;
  Region region_;
  std::map<std::string, RelationId> roots_;

  // in-memory indexes, rebuilt on load
  std::unordered_map<char32_t, RelationId> chars_;
  std::array<RelationId, 256> digits_{};
  std::unordered_map<ShapeKey, RelationId, ShapeHash> shapes_;
  std::unordered_map<std::string, RelationId> texts_;  // level-0 combination by UTF-8 text
  RelationId var_mark_;
  std::array<RelationId, 4> empties_{};
};

}  // namespace shmkb
