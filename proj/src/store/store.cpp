#include "shmkb/store.hpp"

#include <sys/mman.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "shmkb/error.hpp"
#include "shmkb/utf8.hpp"

namespace shmkb {

// Arena layout (see docs/arena_format.md):
//   [0, 256)     region header: free-list heads of reference blocks by size class
//   [256, used)  blocks: u32 tag, u32 payload bytes, payload (8-aligned)
struct Store::Node {
  std::uint8_t level;
  std::uint8_t code;
  std::uint8_t kind;
  std::uint8_t role;
  std::uint8_t flags;
  std::uint8_t policy;
  std::uint16_t reserved0;
  std::uint32_t payload;
  std::uint32_t reserved1;
  std::uint64_t usage;
  std::uint64_t inverse;  // RefList payload offset, 0 when empty
  std::uint64_t direct;
};

namespace {

constexpr std::uint64_t kRegionHeaderBytes = 256;
constexpr int kSizeClasses = 32;

enum BlockTag : std::uint32_t { kTagNode = 1, kTagRefs = 2, kTagFree = 3 };

struct BlockHeader {
  std::uint32_t tag;
  std::uint32_t bytes;
};

struct RefList {
  std::uint32_t count;
  std::uint32_t capacity;
  // std::uint64_t items[capacity] follows
};

enum NodeFlags : std::uint8_t {
  kElementary = 1,
  kUnique = 2,
  kNegative = 4,
  kReal = 8,
  kDead = 16,
  kHasVars = 32,
};

int size_class(std::uint32_t capacity) { return std::bit_width(capacity - 1); }

std::uint64_t* ref_items(RefList* list) { return reinterpret_cast<std::uint64_t*>(list + 1); }
const std::uint64_t* ref_items(const RefList* list) { return reinterpret_cast<const std::uint64_t*>(list + 1); }

std::string_view strip_trailing_blanks(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r' || text.back() == '\n')) {
    text.remove_suffix(1);
  }
  return text;
}

bool is_upper_initial(char32_t c) { return c < 128 && c >= 'A' && c <= 'Z'; }

OrderPolicy policy_for_name(std::u32string_view name) {
  switch (name.back()) {
    case U'+': return OrderPolicy::Ascending;
    case U'-': return OrderPolicy::Descending;
    case U'`': return OrderPolicy::ReverseChronological;
    default: return OrderPolicy::Chronological;
  }
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// construction / persistence

Store::Store(StoreOptions options) : options_(options), region_(options.initial_bytes, options.cap_bytes) {
  init_fresh();
}

Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

void Store::init_fresh() {
  const auto header = region_.allocate(kRegionHeaderBytes);
  (void)header;
}

std::size_t Store::ShapeHash::operator()(const ShapeKey& k) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  mix(k.level);
  mix(k.code);
  mix(k.kind);
  mix(k.role);
  mix(k.flags);
  mix(k.payload);
  for (auto c : k.children) mix(c);
  return static_cast<std::size_t>(h);
}

void Store::snapshot(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    auto put = [&out](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    out.write(kMagic, sizeof kMagic);
    put(kFormatVersion);
    const std::uint64_t next_free = region_.used();
    put(next_free);
    const auto count = static_cast<std::uint32_t>(roots_.size());
    put(count);
    for (const auto& [name, id] : roots_) {
      const auto len = static_cast<std::uint32_t>(name.size());
      put(len);
      out.write(name.data(), len);
      const std::uint64_t off = id.offset();
      put(off);
    }
    out.write(reinterpret_cast<const char*>(region_.data()), static_cast<std::streamsize>(region_.used()));
    if (!out) throw FormatError("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

Store Store::load(const std::filesystem::path& path, StoreOptions options) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw FormatError("cannot open arena file " + path.string());
  struct FdGuard {
    int fd;
    ~FdGuard() { ::close(fd); }
  } guard{fd};
  const auto file_size = static_cast<std::size_t>(std::filesystem::file_size(path));
  if (file_size < sizeof kMagic + 4) throw CorruptionError("arena file truncated: " + path.string());

  void* mapped = ::mmap(nullptr, file_size, PROT_READ, MAP_PRIVATE, fd, 0);
  if (mapped == MAP_FAILED) throw FormatError("cannot map arena file " + path.string());
  struct MapGuard {
    void* p;
    std::size_t n;
    ~MapGuard() { ::munmap(p, n); }
  } map_guard{mapped, file_size};
  const auto* bytes = static_cast<const std::byte*>(mapped);

  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > file_size) throw CorruptionError("arena file truncated: " + path.string());
  };
  auto get = [&](auto& v) {
    need(sizeof v);
    std::memcpy(&v, bytes + pos, sizeof v);
    pos += sizeof v;
  };
  if (std::memcmp(bytes, kMagic, sizeof kMagic) != 0) throw FormatError("bad arena magic in " + path.string());
  pos = sizeof kMagic;
  std::uint32_t version = 0;
  get(version);
  if (version != kFormatVersion) {
    throw FormatError("unsupported arena format version " + std::to_string(version));
  }
  std::uint64_t next_free = 0;
  std::uint32_t count = 0;
  get(next_free);
  get(count);
  std::map<std::string, RelationId> roots;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    get(len);
    need(len);
    std::string name(reinterpret_cast<const char*>(bytes + pos), len);
    pos += len;
    std::uint64_t off = 0;
    get(off);
    roots.emplace(std::move(name), RelationId{off});
  }
  if (file_size - pos != next_free) {
    throw CorruptionError("arena region length " + std::to_string(file_size - pos) + " does not match next_free " +
                          std::to_string(next_free));
  }
  if (next_free < kRegionHeaderBytes || next_free % Region::kAlignment != 0) {
    throw CorruptionError("arena next_free out of range");
  }

  options.initial_bytes = std::max<std::size_t>(options.initial_bytes, next_free);
  if (options.cap_bytes < next_free) throw CapacityError("arena larger than configured cap");
  Store store(options);
  store.region_.assign(std::span<const std::byte>(bytes + pos, next_free));
  store.roots_ = std::move(roots);
  store.rebuild_indexes();
  for (const auto& [name, id] : store.roots_) {
    if (!store.is_live(id)) throw CorruptionError("root '" + name + "' does not name a live node");
  }
  return store;
}

Store::Checkpoint Store::checkpoint() const {
  Checkpoint cp;
  cp.bytes_.assign(region_.data(), region_.data() + region_.used());
  cp.roots_ = roots_;
  return cp;
}

void Store::rollback(const Checkpoint& cp) {
  region_.assign(cp.bytes_);
  roots_ = cp.roots_;
  rebuild_indexes();
}

void Store::rebuild_indexes() {
  chars_.clear();
  digits_.fill(RelationId{});
  shapes_.clear();
  texts_.clear();
  var_mark_ = RelationId{};
  empties_.fill(RelationId{});

  std::uint64_t pos = kRegionHeaderBytes;
  std::vector<RelationId> nodes;
  while (pos < region_.used()) {
    if (pos + sizeof(BlockHeader) > region_.used()) throw CorruptionError("arena block header truncated");
    const auto* block = region_.at<BlockHeader>(pos);
    const std::uint64_t payload = pos + sizeof(BlockHeader);
    if (block->tag != kTagNode && block->tag != kTagRefs && block->tag != kTagFree) {
      throw CorruptionError("unknown arena block tag at offset " + std::to_string(pos));
    }
    if (payload + block->bytes > region_.used() || block->bytes % Region::kAlignment != 0) {
      throw CorruptionError("arena block overruns region at offset " + std::to_string(pos));
    }
    if (block->tag == kTagNode) {
      if (block->bytes != sizeof(Node)) throw CorruptionError("bad node block size");
      const auto* n = region_.at<Node>(payload);
      if (n->level > 3 || n->code > 3) throw CorruptionError("bad node header at offset " + std::to_string(payload));
      if ((n->flags & kDead) == 0) nodes.emplace_back(payload);
    }
    pos = payload + block->bytes;
  }
  if (pos != region_.used()) throw CorruptionError("arena blocks do not end at next_free");
  for (auto id : nodes) {
    const Node* n = node(id);
    for (std::uint64_t list : {n->inverse, n->direct}) {
      if (list == 0) continue;
      if (list < kRegionHeaderBytes + sizeof(BlockHeader) || list + sizeof(RefList) > region_.used() ||
          region_.at<BlockHeader>(list - sizeof(BlockHeader))->tag != kTagRefs) {
        throw CorruptionError("dangling reference list at node " + to_string(id));
      }
    }
  }
  for (auto id : nodes) index_node(id);
}

// ---------------------------------------------------------------------------
// low-level node and reference-list management

Store::Node* Store::node(RelationId id) {
  if (!id || id.offset() < kRegionHeaderBytes || id.offset() + sizeof(Node) > region_.used()) {
    throw StructureError("invalid relation id " + to_string(id));
  }
  return region_.at<Node>(id.offset());
}

const Store::Node* Store::node(RelationId id) const {
  if (!id || id.offset() < kRegionHeaderBytes || id.offset() + sizeof(Node) > region_.used()) {
    throw StructureError("invalid relation id " + to_string(id));
  }
  return region_.at<Node>(id.offset());
}

RelationId Store::allocate_node(std::uint8_t level, Code code, std::uint8_t kind, Role role) {
  const auto block = region_.allocate(sizeof(BlockHeader) + sizeof(Node));
  auto* header = region_.at<BlockHeader>(block);
  header->tag = kTagNode;
  header->bytes = sizeof(Node);
  RelationId id{block + sizeof(BlockHeader)};
  Node* n = region_.at<Node>(id.offset());
  n->level = level;
  n->code = static_cast<std::uint8_t>(code);
  n->kind = kind;
  n->role = static_cast<std::uint8_t>(role);
  return id;
}

std::uint64_t Store::allocate_refs(std::uint32_t capacity) {
  capacity = std::max<std::uint32_t>(capacity, 2);
  capacity = std::bit_ceil(capacity);
  const int cls = size_class(capacity);
  auto* heads = region_.at<std::uint64_t>(0);
  if (heads[cls] != 0) {
    const std::uint64_t list = heads[cls];
    auto* header = region_.at<BlockHeader>(list - sizeof(BlockHeader));
    std::uint64_t next = 0;
    std::memcpy(&next, region_.data() + list, sizeof next);
    heads[cls] = next;
    header->tag = kTagRefs;
    std::memset(region_.data() + list, 0, header->bytes);
    region_.at<RefList>(list)->capacity = capacity;
    return list;
  }
  const std::uint32_t bytes = sizeof(RefList) + capacity * sizeof(std::uint64_t);
  const auto block = region_.allocate(sizeof(BlockHeader) + bytes);
  auto* header = region_.at<BlockHeader>(block);
  header->tag = kTagRefs;
  header->bytes = bytes;
  const std::uint64_t list = block + sizeof(BlockHeader);
  region_.at<RefList>(list)->capacity = capacity;
  return list;
}

void Store::free_refs(std::uint64_t list) {
  if (list == 0) return;
  auto* header = region_.at<BlockHeader>(list - sizeof(BlockHeader));
  const int cls = size_class(region_.at<RefList>(list)->capacity);
  auto* heads = region_.at<std::uint64_t>(0);
  header->tag = kTagFree;
  std::memcpy(region_.data() + list, &heads[cls], sizeof(std::uint64_t));
  heads[cls] = list;
}

RefSpan Store::refs(std::uint64_t list) const {
  if (list == 0) return {};
  const auto* l = region_.at<RefList>(list);
  return RefSpan{ref_items(l), l->count};
}

void Store::push_ref(RelationId owner, bool inverse, RelationId ref) {
  const std::size_t count = (inverse ? inverse_refs(owner) : direct_refs(owner)).size();
  insert_ref(owner, inverse, count, ref);
}

void Store::insert_ref(RelationId owner, bool inverse, std::size_t index, RelationId ref) {
  std::uint64_t list = inverse ? node(owner)->inverse : node(owner)->direct;
  std::uint32_t count = list ? region_.at<RefList>(list)->count : 0;
  std::uint32_t capacity = list ? region_.at<RefList>(list)->capacity : 0;
  if (count == capacity) {
    const std::uint64_t grown = allocate_refs(capacity == 0 ? 2 : capacity * 2);
    if (list != 0) {
      std::memcpy(ref_items(region_.at<RefList>(grown)), ref_items(region_.at<RefList>(list)),
                  count * sizeof(std::uint64_t));
      free_refs(list);
    }
    region_.at<RefList>(grown)->count = count;
    list = grown;
    Node* n = node(owner);
    (inverse ? n->inverse : n->direct) = list;
  }
  auto* l = region_.at<RefList>(list);
  auto* items = ref_items(l);
  std::memmove(items + index + 1, items + index, (count - index) * sizeof(std::uint64_t));
  items[index] = ref.offset();
  l->count = count + 1;
}

void Store::erase_ref_at(RelationId owner, bool inverse, std::size_t index) {
  Node* n = node(owner);
  const std::uint64_t list = inverse ? n->inverse : n->direct;
  auto* l = region_.at<RefList>(list);
  auto* items = ref_items(l);
  std::memmove(items + index, items + index + 1, (l->count - index - 1) * sizeof(std::uint64_t));
  --l->count;
  if (l->count == 0) {
    free_refs(list);
    (inverse ? n->inverse : n->direct) = 0;
  }
}

bool Store::erase_ref(RelationId owner, bool inverse, RelationId ref) {
  const RefSpan span = inverse ? inverse_refs(owner) : direct_refs(owner);
  for (std::size_t i = 0; i < span.size(); ++i) {
    if (span[i] == ref) {
      erase_ref_at(owner, inverse, i);
      return true;
    }
  }
  return false;
}

std::size_t Store::count_child(RelationId parent, RelationId child) const {
  std::size_t n = 0;
  for (auto c : inverse_refs(parent)) n += (c == child);
  return n;
}

// ---------------------------------------------------------------------------
// indexes

Store::ShapeKey Store::shape_key(std::uint8_t level, Code code, const RelationSpec& spec, bool negative, bool real,
                                 std::span<const RelationId> children) const {
  ShapeKey key{level,
               static_cast<std::uint8_t>(code),
               spec.kind,
               static_cast<std::uint8_t>(spec.role),
               static_cast<std::uint8_t>((negative ? kNegative : 0) | (real ? kReal : 0)),
               spec.role == Role::Function ? 0u : spec.payload,
               {}};
  key.children.reserve(children.size());
  for (auto c : children) key.children.push_back(c.offset());
  if (code == Code::Conjunction || code == Code::Disjunction) std::sort(key.children.begin(), key.children.end());
  return key;
}

Store::ShapeKey Store::shape_key_of(RelationId id) const {
  const Node* n = node(id);
  RelationSpec spec{n->level, n->kind, static_cast<Role>(n->role), false, n->payload};
  const auto children = inverse_refs(id).to_vector();
  return shape_key(n->level, static_cast<Code>(n->code), spec, n->flags & kNegative, n->flags & kReal, children);
}

void Store::index_node(RelationId id) {
  const Node* n = node(id);
  const auto role = static_cast<Role>(n->role);
  switch (role) {
    case Role::Char: chars_[n->payload] = id; break;
    case Role::Digit: digits_[n->payload & 0xFF] = id; break;
    case Role::VarMark: var_mark_ = id; break;
    case Role::Empty: empties_[n->level] = id; break;
    default: break;
  }
  if ((n->flags & (kUnique | kElementary)) == 0) {
    shapes_.emplace(shape_key_of(id), id);
    if (n->level == 0 && role == Role::Plain) texts_.emplace(text(id), id);
  }
}

void Store::unindex_node(RelationId id) {
  const Node* n = node(id);
  if ((n->flags & (kUnique | kElementary)) != 0) return;
  auto it = shapes_.find(shape_key_of(id));
  if (it != shapes_.end() && it->second == id) shapes_.erase(it);
  if (n->level == 0 && static_cast<Role>(n->role) == Role::Plain) {
    auto t = texts_.find(text(id));
    if (t != texts_.end() && t->second == id) texts_.erase(t);
  }
}

// ---------------------------------------------------------------------------
// interning

RelationId Store::intern_elementary(Role role, std::uint32_t payload) {
  std::uint8_t level = 0;
  std::uint8_t kind = 0;
  if (role == Role::Empty) level = static_cast<std::uint8_t>(payload);
  if (role == Role::VarMark) kind = kind::kVariable;
  const RelationId id = allocate_node(level, Code::Sequence, kind, role);
  Node* n = node(id);
  n->flags = kElementary;
  n->payload = payload;
  index_node(id);
  return id;
}

RelationId Store::intern_char(char32_t codepoint) {
  if (!utf8::is_scalar(codepoint)) throw DomainError("not a Unicode scalar value");
  if (auto it = chars_.find(codepoint); it != chars_.end()) {
    touch(it->second);
    return it->second;
  }
  return intern_elementary(Role::Char, codepoint);
}

RelationId Store::var_mark() {
  if (!var_mark_) var_mark_ = intern_elementary(Role::VarMark, 0);
  return var_mark_;
}

RelationId Store::empty(std::uint8_t level) {
  if (level < 1 || level > 3) throw StructureError("empty relations exist at levels 1..3");
  if (!empties_[level]) empties_[level] = intern_elementary(Role::Empty, level);
  return empties_[level];
}

RelationId Store::intern_shape(std::uint8_t level, Code code, std::uint8_t kind, Role role, bool negative, bool real,
                               std::span<const RelationId> children, std::uint32_t payload) {
  RelationSpec spec{level, kind, role, false, payload};
  auto key = shape_key(level, code, spec, negative, real, children);
  if (auto it = shapes_.find(key); it != shapes_.end()) {
    touch(it->second);
    return it->second;
  }
  const RelationId id = allocate_node(level, code, kind, role);
  std::uint8_t flags = (negative ? kNegative : 0) | (real ? kReal : 0);
  bool vars = false;
  if (role != Role::Word && role != Role::VarName && role != Role::Paradigm) {
    for (auto c : children) vars = vars || has_variables(c);
  }
  if (vars) flags |= kHasVars;
  node(id)->flags = flags;
  node(id)->payload = payload;
  std::vector<RelationId> seen;
  for (auto c : children) {
    push_ref(id, true, c);
    if (std::find(seen.begin(), seen.end(), c) == seen.end()) {
      seen.push_back(c);
      push_ref(c, false, id);
    }
  }
  shapes_.emplace(std::move(key), id);
  if (level == 0 && role == Role::Plain) texts_.emplace(text(id), id);
  return id;
}

RelationId Store::intern_number(Number value) {
  bool real = false;
  std::uint64_t bits = 0;
  bool negative = false;
  std::int64_t as_int = 0;
  if (const double* d = std::get_if<double>(&value)) {
    if (!std::isfinite(*d)) throw DomainError("non-finite number");
    if (std::trunc(*d) == *d && *d >= -9.2e18 && *d <= 9.2e18) {
      as_int = static_cast<std::int64_t>(*d);
    } else {
      real = true;
      bits = std::bit_cast<std::uint64_t>(*d);
    }
  } else {
    as_int = std::get<std::int64_t>(value);
  }
  if (!real) {
    if (as_int >= 0 && as_int <= 0xFF) {
      const auto digit = static_cast<std::uint32_t>(as_int);
      if (digits_[digit]) {
        touch(digits_[digit]);
        return digits_[digit];
      }
      return intern_elementary(Role::Digit, digit);
    }
    negative = as_int < 0;
    bits = negative ? static_cast<std::uint64_t>(-(as_int + 1)) + 1 : static_cast<std::uint64_t>(as_int);
  }
  // rightmost digit first; high zero digits are not stored
  std::vector<RelationId> digits;
  do {
    digits.push_back(intern_number(static_cast<std::int64_t>(bits & 0xFF)));
    bits >>= 8;
  } while (bits != 0);
  return intern_shape(0, Code::Sequence, kind::kConstant, Role::Number, negative, real, digits);
}

RelationId Store::intern_number_word(Number value) {
  const RelationId n = intern_number(value);
  return intern_shape(1, Code::Sequence, kind::kConstant, Role::Word, false, false, std::span(&n, 1));
}

std::optional<RelationId> Store::find_chars(std::u32string_view text) const {
  if (text.empty()) return std::nullopt;
  if (text.size() == 1) {
    auto it = chars_.find(text[0]);
    if (it == chars_.end()) return std::nullopt;
    return it->second;
  }
  auto it = texts_.find(utf8::encode(text));
  if (it == texts_.end()) return std::nullopt;
  return it->second;
}

RelationId Store::intern_chars(std::u32string_view text) {
  if (text.empty()) throw DomainError("empty character sequence");
  if (text.size() == 1) return intern_char(text[0]);
  if (auto existing = find_chars(text)) {
    touch(*existing);
    return *existing;
  }
  for (char32_t c : text) {
    if (!utf8::is_scalar(c)) throw DomainError("not a Unicode scalar value");
  }
  // Greedy left-to-right: at each position take the longest combination
  // already stored, else the single character.
  std::vector<RelationId> parts;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t taken = 0;
    for (std::size_t len = text.size() - i; len >= 2; --len) {
      if (i == 0 && len == text.size()) continue;
      if (auto it = texts_.find(utf8::encode(text.substr(i, len))); it != texts_.end()) {
        parts.push_back(it->second);
        touch(it->second);
        taken = len;
        break;
      }
    }
    if (taken == 0) {
      parts.push_back(intern_char(text[i]));
      taken = 1;
    }
    i += taken;
  }
  return intern_shape(0, Code::Sequence, kind::kConstant, Role::Plain, false, false, parts);
}

RelationId Store::intern_word(std::string_view text) {
  text = strip_trailing_blanks(text);
  if (text.empty()) throw DomainError("empty word");
  const RelationId s = intern_chars(utf8::decode(text));
  return intern_shape(1, Code::Sequence, kind::kConstant, Role::Word, false, false, std::span(&s, 1));
}

std::optional<RelationId> Store::find_word(std::string_view text) const {
  text = strip_trailing_blanks(text);
  if (text.empty()) return std::nullopt;
  std::u32string decoded;
  try {
    decoded = utf8::decode(text);
  } catch (const DomainError&) {
    return std::nullopt;
  }
  auto s = find_chars(decoded);
  if (!s) return std::nullopt;
  RelationSpec spec{1, kind::kConstant, Role::Word, false, 0};
  auto it = shapes_.find(shape_key(1, Code::Sequence, spec, false, false, std::span(&*s, 1)));
  if (it == shapes_.end()) return std::nullopt;
  touch(it->second);
  return it->second;
}

RelationId Store::make_relation(Code code, std::span<const RelationId> children, RelationSpec spec) {
  if (children.empty()) throw StructureError("a relation needs at least one constituent");
  std::uint8_t max_level = 0;
  for (auto c : children) {
    if (!is_live(c)) throw StructureError("constituent " + to_string(c) + " is not a live relation");
    max_level = std::max(max_level, node(c)->level);
  }
  const std::uint8_t level = spec.level.value_or(max_level);
  if (level > 3) throw StructureError("relation level above 3");
  for (auto c : children) {
    const auto cl = node(c)->level;
    if (!(cl == level || cl + 1 == level)) {
      throw StructureError("constituent at level " + std::to_string(cl) + " cannot belong to a level-" +
                           std::to_string(level) + " relation");
    }
  }
  if (!spec.unique) {
    return intern_shape(level, code, spec.kind, spec.role, false, false, children, spec.payload);
  }
  const RelationId id = allocate_node(level, code, spec.kind, spec.role);
  node(id)->flags = kUnique;
  node(id)->payload = spec.payload;
  for (auto c : children) append_child(id, c);
  return id;
}

std::optional<RelationId> Store::find_relation(Code code, std::span<const RelationId> children,
                                               RelationSpec spec) const {
  if (children.empty()) return std::nullopt;
  std::uint8_t max_level = 0;
  for (auto c : children) {
    if (!is_live(c)) return std::nullopt;
    max_level = std::max(max_level, node(c)->level);
  }
  spec.level = spec.level.value_or(max_level);
  auto it = shapes_.find(shape_key(*spec.level, code, spec, false, false, children));
  if (it == shapes_.end()) return std::nullopt;
  touch(it->second);
  return it->second;
}

// ---------------------------------------------------------------------------
// paradigms and variables

RelationId Store::make_paradigm(std::uint8_t level, std::uint8_t kind, RelationId defining, OrderPolicy policy) {
  const RelationId id = allocate_node(level, Code::Disjunction, kind, Role::Paradigm);
  Node* n = node(id);
  n->flags = kUnique;
  n->policy = static_cast<std::uint8_t>(policy);
  append_child(id, defining);
  if (level == 1 && (kind == kind::kVariable || kind == kind::kGlobal) && node(defining)->kind == kind::kHasVariables) {
    node(id)->flags |= kHasVars;
  }
  return id;
}

std::optional<RelationId> Store::find_paradigm(RelationId defining) const {
  if (!is_live(defining)) return std::nullopt;
  for (auto p : direct_refs(defining)) {
    const Node* n = node(p);
    if (static_cast<Role>(n->role) == Role::Paradigm && (n->flags & kDead) == 0 && inverse_refs(p).front() == defining) {
      return p;
    }
  }
  return std::nullopt;
}

RelationId Store::paradigm_defining(RelationId paradigm) const {
  if (info(paradigm).role != Role::Paradigm) throw StructureError(to_string(paradigm) + " is not a paradigm");
  return inverse_refs(paradigm).front();
}

std::vector<RelationId> Store::paradigm_values(RelationId paradigm) const {
  if (info(paradigm).role != Role::Paradigm) throw StructureError(to_string(paradigm) + " is not a paradigm");
  const auto refs = inverse_refs(paradigm);
  return {std::next(refs.begin()), refs.end()};
}

bool Store::paradigm_contains(RelationId paradigm, RelationId value) const {
  const auto refs = inverse_refs(paradigm);
  return std::find(std::next(refs.begin()), refs.end(), value) != refs.end();
}

OrderPolicy Store::paradigm_policy(RelationId paradigm) const { return info(paradigm).policy; }

std::size_t Store::ordered_position(RelationId paradigm, RelationId value) const {
  const auto refs = inverse_refs(paradigm);
  switch (info(paradigm).policy) {
    case OrderPolicy::Chronological: return refs.size();
    case OrderPolicy::ReverseChronological: return 1;
    case OrderPolicy::Ascending:
      for (std::size_t i = 1; i < refs.size(); ++i) {
        if (compare_values(refs[i], value) > 0) return i;
      }
      return refs.size();
    case OrderPolicy::Descending:
      for (std::size_t i = 1; i < refs.size(); ++i) {
        if (compare_values(refs[i], value) < 0) return i;
      }
      return refs.size();
  }
  return refs.size();
}

void Store::paradigm_insert(RelationId paradigm, RelationId value) {
  const NodeInfo pi = info(paradigm);
  if (pi.role != Role::Paradigm || pi.code != Code::Disjunction) {
    throw StructureError(to_string(paradigm) + " is not a paradigm");
  }
  if (paradigm_contains(paradigm, value)) {
    touch(paradigm);
    return;
  }
  if (value == paradigm_defining(paradigm)) throw StructureError("a paradigm cannot hold its defining relation");
  insert_child(paradigm, ordered_position(paradigm, value), value);
}

bool Store::paradigm_erase(RelationId paradigm, RelationId value) {
  const auto refs = inverse_refs(paradigm);
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i] == value) {
      remove_child(paradigm, i);
      return true;
    }
  }
  return false;
}

RelationId Store::variable(std::string_view name) {
  if (name.empty()) throw DomainError("empty variable name");
  const auto decoded = utf8::decode(name);
  const RelationId text_structure = intern_chars(decoded);
  const RelationId parts[] = {var_mark(), text_structure};
  const RelationId var_name = intern_shape(0, Code::Sequence, kind::kHasVariables, Role::VarName, false, false, parts);
  const RelationId word =
      intern_shape(1, Code::Sequence, kind::kHasVariables, Role::Word, false, false, std::span(&var_name, 1));
  if (auto existing = find_paradigm(word)) return *existing;
  const std::uint8_t k = is_upper_initial(decoded.front()) ? kind::kGlobal : kind::kVariable;
  return make_paradigm(1, k, word, policy_for_name(decoded));
}

std::optional<RelationId> Store::find_variable(std::string_view name) const {
  if (name.empty() || !var_mark_) return std::nullopt;
  std::u32string decoded;
  try {
    decoded = utf8::decode(name);
  } catch (const DomainError&) {
    return std::nullopt;
  }
  auto s = find_chars(decoded);
  if (!s) return std::nullopt;
  const RelationId parts[] = {var_mark_, *s};
  RelationSpec name_spec{0, kind::kHasVariables, Role::VarName, false, 0};
  auto vn = shapes_.find(shape_key(0, Code::Sequence, name_spec, false, false, parts));
  if (vn == shapes_.end()) return std::nullopt;
  RelationSpec word_spec{1, kind::kHasVariables, Role::Word, false, 0};
  auto w = shapes_.find(shape_key(1, Code::Sequence, word_spec, false, false, std::span(&vn->second, 1)));
  if (w == shapes_.end()) return std::nullopt;
  return find_paradigm(w->second);
}

bool Store::is_variable(RelationId id) const {
  if (!is_live(id)) return false;
  const Node* n = node(id);
  if (static_cast<Role>(n->role) != Role::Paradigm || n->level != 1) return false;
  if (n->kind != kind::kVariable && n->kind != kind::kGlobal) return false;
  const auto def = inverse_refs(id).front();
  return node(def)->kind == kind::kHasVariables && static_cast<Role>(node(def)->role) == Role::Word;
}

std::string Store::variable_name(RelationId var) const {
  if (!is_variable(var)) throw StructureError(to_string(var) + " is not a variable");
  const RelationId word = inverse_refs(var).front();
  const RelationId var_name = inverse_refs(word).front();
  return text(inverse_refs(var_name)[1]);
}

// ---------------------------------------------------------------------------
// editing

void Store::insert_child(RelationId parent, std::size_t index, RelationId child) {
  Node* p = node(parent);
  if ((p->flags & kUnique) == 0) throw StructureError("only unique relations may be edited in place");
  if (!is_live(child)) throw StructureError("constituent " + to_string(child) + " is not a live relation");
  const auto cl = node(child)->level;
  const auto pl = node(parent)->level;
  if (!(cl == pl || cl + 1 == pl)) {
    throw StructureError("constituent at level " + std::to_string(cl) + " cannot belong to a level-" +
                         std::to_string(pl) + " relation");
  }
  const bool linked = count_child(parent, child) > 0;
  insert_ref(parent, true, index, child);
  if (!linked) push_ref(child, false, parent);
  if (has_variables(child) && static_cast<Role>(node(parent)->role) != Role::Paradigm) node(parent)->flags |= kHasVars;
}

void Store::append_child(RelationId parent, RelationId child) {
  insert_child(parent, inverse_refs(parent).size(), child);
}

void Store::remove_child(RelationId parent, std::size_t index) {
  Node* p = node(parent);
  if ((p->flags & kUnique) == 0) throw StructureError("only unique relations may be edited in place");
  const auto refs = inverse_refs(parent);
  if (index >= refs.size()) throw StructureError("child index out of range");
  const RelationId child = refs[index];
  erase_ref_at(parent, true, index);
  if (count_child(parent, child) == 0) erase_ref(child, false, parent);
  if (static_cast<Role>(node(parent)->role) != Role::Paradigm) {
    bool vars = false;
    for (auto c : inverse_refs(parent)) vars = vars || has_variables(c);
    if (vars) {
      node(parent)->flags |= kHasVars;
    } else {
      node(parent)->flags &= static_cast<std::uint8_t>(~kHasVars);
    }
  }
}

void Store::replace_child(RelationId parent, std::size_t index, RelationId child) {
  if (index >= inverse_refs(parent).size()) throw StructureError("child index out of range");
  insert_child(parent, index + 1, child);
  remove_child(parent, index);
}

void Store::set_payload(RelationId id, std::uint32_t payload) { node(id)->payload = payload; }

void Store::remove_relation(RelationId id, const std::function<bool(RelationId)>& keep) {
  if (!is_live(id)) return;
  if (!direct_refs(id).empty()) throw StructureError(to_string(id) + " is still a constituent of other relations");
  Node* n = node(id);
  if (n->flags & kElementary) throw StructureError("elementary relations are never removed");
  unindex_node(id);
  std::vector<RelationId> children = inverse_refs(id).to_vector();
  for (std::size_t i = children.size(); i-- > 0;) erase_ref_at(id, true, i);
  std::sort(children.begin(), children.end());
  children.erase(std::unique(children.begin(), children.end()), children.end());
  for (auto c : children) erase_ref(c, false, id);
  node(id)->flags |= kDead;

  std::set<RelationId> rooted;
  for (const auto& [name, r] : roots_) rooted.insert(r);
  for (auto c : children) {
    if (!is_live(c) || !direct_refs(c).empty()) continue;
    const Node* cn = node(c);
    if ((cn->flags & kElementary) || static_cast<Role>(cn->role) == Role::Paradigm || rooted.count(c)) continue;
    if (keep && keep(c)) continue;
    remove_relation(c, keep);
  }
}

// ---------------------------------------------------------------------------
// inspection

bool Store::is_live(RelationId id) const {
  if (!id || id.offset() < kRegionHeaderBytes + sizeof(BlockHeader) || id.offset() + sizeof(Node) > region_.used()) {
    return false;
  }
  const auto* header = region_.at<BlockHeader>(id.offset() - sizeof(BlockHeader));
  if (header->tag != kTagNode) return false;
  return (region_.at<Node>(id.offset())->flags & kDead) == 0;
}

NodeInfo Store::info(RelationId id) const {
  const Node* n = node(id);
  NodeInfo out;
  out.level = n->level;
  out.code = static_cast<Code>(n->code);
  out.kind = n->kind;
  out.role = static_cast<Role>(n->role);
  out.elementary = n->flags & kElementary;
  out.unique = n->flags & kUnique;
  out.negative = n->flags & kNegative;
  out.real = n->flags & kReal;
  out.policy = static_cast<OrderPolicy>(n->policy);
  out.payload = n->payload;
  out.usage = n->usage;
  return out;
}

RefSpan Store::inverse_refs(RelationId id) const { return refs(node(id)->inverse); }
RefSpan Store::direct_refs(RelationId id) const { return refs(node(id)->direct); }

bool Store::has_variables(RelationId id) const { return node(id)->flags & kHasVars; }

void Store::touch(RelationId id) const {
  auto* n = const_cast<Node*>(node(id));
  std::atomic_ref<std::uint64_t>(n->usage).fetch_add(1, std::memory_order_relaxed);
}

std::optional<Number> Store::number_value(RelationId id) const {
  if (!is_live(id)) return std::nullopt;
  const Node* n = node(id);
  switch (static_cast<Role>(n->role)) {
    case Role::Digit: return Number{static_cast<std::int64_t>(n->payload)};
    case Role::Number: {
      std::uint64_t bits = 0;
      const auto digits = inverse_refs(id);
      for (std::size_t i = digits.size(); i-- > 0;) bits = (bits << 8) | node(digits[i])->payload;
      if (n->flags & kReal) return Number{std::bit_cast<double>(bits)};
      if (n->flags & kNegative) return Number{static_cast<std::int64_t>(~bits + 1)};
      return Number{static_cast<std::int64_t>(bits)};
    }
    case Role::Word: {
      const auto refs = inverse_refs(id);
      if (refs.size() == 1) {
        const auto r = static_cast<Role>(node(refs[0])->role);
        if (r == Role::Digit || r == Role::Number) return number_value(refs[0]);
      }
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

std::u32string Store::chars(RelationId id) const {
  const Node* n = node(id);
  switch (static_cast<Role>(n->role)) {
    case Role::Char: return std::u32string(1, static_cast<char32_t>(n->payload));
    case Role::Plain:
      if (n->level == 0) {
        std::u32string out;
        for (auto c : inverse_refs(id)) out += chars(c);
        return out;
      }
      break;
    case Role::Word: return chars(inverse_refs(id).front());
    case Role::VarName: return chars(inverse_refs(id)[1]);
    case Role::Empty:
    case Role::VarMark: return {};
    default: break;
  }
  return utf8::decode(text(id));
}

std::string Store::text(RelationId id) const {
  const Node* n = node(id);
  const auto role = static_cast<Role>(n->role);
  switch (role) {
    case Role::Char: {
      std::string out;
      utf8::append(out, static_cast<char32_t>(n->payload));
      return out;
    }
    case Role::Digit:
    case Role::Number: {
      const auto v = *number_value(id);
      if (const double* d = std::get_if<double>(&v)) return format_real(*d);
      return std::to_string(std::get<std::int64_t>(v));
    }
    case Role::VarMark:
    case Role::Empty: return {};
    case Role::Word: return text(inverse_refs(id).front());
    case Role::VarName: return text(inverse_refs(id)[1]);
    case Role::Paradigm:
      if (is_variable(id)) return variable_name(id);
      break;
    case Role::Function: return "#" + text(inverse_refs(id).front());
    default: break;
  }
  if (role == Role::Plain && n->level == 0) {
    std::string out;
    for (auto c : inverse_refs(id)) out += text(c);
    return out;
  }
  static constexpr const char* kOpen[] = {"(", "<", "[", "{"};
  static constexpr const char* kClose[] = {")", ">", "]", "}"};
  std::string out = kOpen[n->code];
  bool first = true;
  for (auto c : inverse_refs(id)) {
    if (!first) out += ' ';
    first = false;
    out += text(c);
  }
  out += kClose[n->code];
  return out;
}

int Store::compare_values(RelationId a, RelationId b) const {
  if (a == b) return 0;
  const auto na = number_value(a);
  const auto nb = number_value(b);
  if (na && nb) {
    auto as_ld = [](const Number& v) {
      return std::visit([](auto x) { return static_cast<long double>(x); }, v);
    };
    if (std::holds_alternative<std::int64_t>(*na) && std::holds_alternative<std::int64_t>(*nb)) {
      const auto x = std::get<std::int64_t>(*na);
      const auto y = std::get<std::int64_t>(*nb);
      if (x != y) return x < y ? -1 : 1;
    } else {
      const auto x = as_ld(*na);
      const auto y = as_ld(*nb);
      if (x != y) return x < y ? -1 : 1;
    }
  } else if (na || nb) {
    return na ? -1 : 1;
  } else {
    auto flat = [this](RelationId id) {
      const auto r = info(id).role;
      return r == Role::Char || r == Role::Word || r == Role::Empty || (r == Role::Plain && info(id).level == 0);
    };
    const bool fa = flat(a);
    const bool fb = flat(b);
    if (fa && fb) {
      const auto ca = chars(a);
      const auto cb = chars(b);
      if (ca != cb) return ca < cb ? -1 : 1;
    } else if (fa != fb) {
      return fa ? -1 : 1;
    } else {
      const auto ra = inverse_refs(a).to_vector();
      const auto rb = inverse_refs(b).to_vector();
      for (std::size_t i = 0; i < std::min(ra.size(), rb.size()); ++i) {
        if (const int c = compare_values(ra[i], rb[i]); c != 0) return c;
      }
      if (ra.size() != rb.size()) return ra.size() < rb.size() ? -1 : 1;
    }
  }
  return a < b ? -1 : 1;
}

// ---------------------------------------------------------------------------
// roots, traversal, statistics

void Store::set_root(const std::string& name, RelationId id) {
  if (!is_live(id)) throw StructureError("root must name a live relation");
  roots_[name] = id;
}

void Store::erase_root(const std::string& name) { roots_.erase(name); }

std::optional<RelationId> Store::root(const std::string& name) const {
  auto it = roots_.find(name);
  if (it == roots_.end()) return std::nullopt;
  return it->second;
}

void Store::for_each_node(const std::function<void(RelationId)>& fn) const {
  std::uint64_t pos = kRegionHeaderBytes;
  while (pos < region_.used()) {
    const auto* block = region_.at<BlockHeader>(pos);
    const std::uint64_t payload = pos + sizeof(BlockHeader);
    const std::uint32_t bytes = block->bytes;
    if (block->tag == kTagNode && (region_.at<Node>(payload)->flags & kDead) == 0) fn(RelationId{payload});
    pos = payload + bytes;
  }
}

StoreStats Store::stats() const {
  StoreStats s;
  s.arena_bytes = region_.used();
  std::uint64_t pos = kRegionHeaderBytes;
  while (pos < region_.used()) {
    const auto* block = region_.at<BlockHeader>(pos);
    const std::uint64_t payload = pos + sizeof(BlockHeader);
    if (block->tag == kTagNode) {
      const Node* n = region_.at<Node>(payload);
      if (n->flags & kDead) {
        ++s.dead;
      } else {
        ++s.nodes_per_level[n->level];
        if (n->flags & kElementary) {
          ++s.elementary;
        } else if (n->level == 0) {
          ++s.level0_aggregates;
        }
        s.usage_total += n->usage;
      }
    }
    pos = payload + block->bytes;
  }
  return s;
}

std::string Store::check_invariants() const {
  std::string problem;
  for_each_node([&](RelationId id) {
    if (!problem.empty()) return;
    const Node* n = node(id);
    const auto children = inverse_refs(id);
    if ((n->flags & kElementary) && !children.empty()) {
      problem = "elementary " + to_string(id) + " has constituents";
      return;
    }
    for (auto c : children) {
      if (!is_live(c)) {
        problem = to_string(id) + " references dead " + to_string(c);
        return;
      }
      const auto parents = direct_refs(c);
      if (std::find(parents.begin(), parents.end(), id) == parents.end()) {
        problem = "duality: " + to_string(c) + " lacks direct reference to " + to_string(id);
        return;
      }
      const auto cl = node(c)->level;
      if (!(cl == n->level || cl + 1 == n->level)) {
        problem = "level: " + to_string(c) + " (level " + std::to_string(cl) + ") inside " + to_string(id);
        return;
      }
    }
    for (auto p : direct_refs(id)) {
      if (!is_live(p) || count_child(p, id) == 0) {
        problem = "duality: " + to_string(id) + " has stray direct reference to " + to_string(p);
        return;
      }
    }
    if (static_cast<Role>(n->role) == Role::Paradigm) {
      const auto policy = static_cast<OrderPolicy>(n->policy);
      for (std::size_t i = 2; i < children.size(); ++i) {
        const int c = compare_values(children[i - 1], children[i]);
        if ((policy == OrderPolicy::Ascending && c > 0) || (policy == OrderPolicy::Descending && c < 0)) {
          problem = "paradigm " + to_string(id) + " out of order";
          return;
        }
      }
    }
  });
  return problem;
}

}  // namespace shmkb
