#include "abx/embedding_store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_set>

#include "abx/error.hpp"

static_assert(std::endian::native == std::endian::little, "EMBX I/O assumes a little-endian host");

namespace abx {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'X'};

template <typename T>
T load_le(const std::byte* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

matrix_header parse_header(std::span<const std::byte> bytes, const fs::path& path) {
  if (bytes.size() < kEmbxHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error(path.string() + ": not an EMBX file");
  }
  matrix_header h;
  h.format_version = load_le<std::uint32_t>(bytes.data() + 4);
  h.dtype = load_le<std::uint32_t>(bytes.data() + 8);
  h.n_sentences = load_le<std::uint64_t>(bytes.data() + 12);
  h.dim = load_le<std::uint64_t>(bytes.data() + 20);
  if (h.format_version != kEmbxFormatVersion) {
    throw format_error(path.string() + ": unsupported format version " + std::to_string(h.format_version));
  }
  if (h.dtype != kDtypeF32) {
    throw format_error(path.string() + ": unsupported dtype code " + std::to_string(h.dtype));
  }
  return h;
}

std::size_t payload_bytes(const matrix_header& h) {
  return kEmbxHeaderBytes + h.n_sentences * sizeof(std::uint64_t) + h.n_sentences * h.dim * sizeof(float);
}

}  // namespace

void validate_matrix(std::span<const meaning_id> ids, std::span<const float> vectors, std::size_t dim) {
  if (dim == 0) throw invariant_error("matrix dim must be positive");
  if (vectors.size() != ids.size() * dim) {
    throw invariant_error("vector block holds " + std::to_string(vectors.size()) + " floats, expected " +
                          std::to_string(ids.size() * dim));
  }
  std::unordered_set<meaning_id> seen;
  seen.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) {
      throw invariant_error("duplicate meaning id " + std::to_string(ids[i]));
    }
    bool nonzero = false;
    for (float v : vectors.subspan(i * dim, dim)) {
      if (!std::isfinite(v)) throw invariant_error("non-finite value in row of meaning " + std::to_string(ids[i]));
      nonzero |= v != 0.0f;
    }
    if (!nonzero) throw invariant_error("all-zero vector for meaning " + std::to_string(ids[i]));
  }
}

void write_matrix(const embedding_matrix& m, const fs::path& path) {
  validate_matrix(m.meaning_ids, m.vectors, m.dim);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  const std::uint32_t version = kEmbxFormatVersion;
  const std::uint32_t dtype = kDtypeF32;
  const std::uint64_t n = m.rows();
  const std::uint64_t dim = m.dim;
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&dtype), sizeof dtype);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.write(reinterpret_cast<const char*>(m.meaning_ids.data()),
            static_cast<std::streamsize>(m.meaning_ids.size() * sizeof(meaning_id)));
  out.write(reinterpret_cast<const char*>(m.vectors.data()),
            static_cast<std::streamsize>(m.vectors.size() * sizeof(float)));
  out.flush();
  if (!out) throw io_error("write failed for " + path.string());
}

matrix_header read_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::byte buf[kEmbxHeaderBytes];
  in.read(reinterpret_cast<char*>(buf), sizeof buf);
  return parse_header({buf, static_cast<std::size_t>(in.gcount())}, path);
}

embedding_matrix read_matrix(const fs::path& path) {
  mapped_file file(path);
  const auto bytes = file.bytes();
  const auto h = parse_header(bytes, path);
  if (bytes.size() != payload_bytes(h)) {
    throw format_error(path.string() + ": file size does not match header");
  }
  embedding_matrix m;
  m.dim = h.dim;
  m.meaning_ids.resize(h.n_sentences);
  m.vectors.resize(h.n_sentences * h.dim);
  std::memcpy(m.meaning_ids.data(), bytes.data() + kEmbxHeaderBytes, h.n_sentences * sizeof(meaning_id));
  std::memcpy(m.vectors.data(), bytes.data() + kEmbxHeaderBytes + h.n_sentences * sizeof(meaning_id),
              m.vectors.size() * sizeof(float));
  validate_matrix(m.meaning_ids, m.vectors, m.dim);
  return m;
}

mapped_file::mapped_file(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw io_error("cannot open " + path.string() + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw io_error("cannot stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw io_error("mmap failed for " + path.string() + ": " + std::strerror(errno));
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

mapped_file::~mapped_file() {
  if (data_ != nullptr) ::munmap(const_cast<std::byte*>(data_), size_);
}

matrix_view::matrix_view(cell_key key, std::shared_ptr<const mapped_file> file, std::size_t n, std::size_t dim)
    : key_(std::move(key)), file_(std::move(file)), dim_(dim), ids_(n) {
  const auto bytes = file_->bytes();
  std::memcpy(ids_.data(), bytes.data() + kEmbxHeaderBytes, n * sizeof(meaning_id));
  const auto* first = bytes.data() + kEmbxHeaderBytes + n * sizeof(meaning_id);
  // Page-aligned mapping plus a 4-byte-multiple offset keeps floats aligned.
  vectors_ = {reinterpret_cast<const float*>(first), n * dim};
  validate_matrix(ids_, vectors_, dim_);
  row_of_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) row_of_.emplace(ids_[i], i);
}

std::size_t matrix_view::row_index(meaning_id id) const {
  auto it = row_of_.find(id);
  if (it == row_of_.end()) {
    throw lookup_error("meaning " + std::to_string(id) + " not in matrix (checkpoint " +
                       std::to_string(key_.checkpoint) + ", layer " + std::to_string(key_.layer) + ", " +
                       key_.language + ")");
  }
  return it->second;
}

store_manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw format_error("manifest " + path.string() + ": " + e.what());
  }
  store_manifest m;
  try {
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.languages = j.value("languages", std::vector<std::string>{});
    m.checkpoints = j.value("checkpoints", std::vector<std::int64_t>{});
    m.layers = j.value("layers", std::vector<int>{});
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("checkpoint").get<std::int64_t>(), e.at("layer").get<int>(),
                           e.at("language").get<std::string>(), e.at("path").get<std::string>(),
                           e.at("n_sentences").get<std::uint64_t>(), e.at("dim").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw format_error("manifest " + path.string() + ": " + e.what());
  }
  if (m.format_version != kEmbxFormatVersion) {
    throw format_error("manifest " + path.string() + ": unsupported format version " +
                       std::to_string(m.format_version));
  }
  // Axis lists may be omitted (merged fragments); when present they must cover the entries.
  const auto derived = make_manifest(m.entries);
  auto reconcile = [&](auto& listed, const auto& from_entries, const char* what) {
    if (!j.contains(what)) {
      listed = from_entries;
      return;
    }
    for (const auto& v : from_entries) {
      if (std::find(listed.begin(), listed.end(), v) == listed.end()) {
        throw format_error("manifest " + path.string() + ": entry outside the listed " + what);
      }
    }
    std::sort(listed.begin(), listed.end());
  };
  reconcile(m.languages, derived.languages, "languages");
  reconcile(m.checkpoints, derived.checkpoints, "checkpoints");
  reconcile(m.layers, derived.layers, "layers");
  return m;
}

void write_manifest(const store_manifest& m, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"checkpoint", e.checkpoint},
                       {"layer", e.layer},
                       {"language", e.language},
                       {"path", e.path},
                       {"n_sentences", e.n_sentences},
                       {"dim", e.dim}});
  }
  json j = {{"format_version", m.format_version},
            {"languages", m.languages},
            {"checkpoints", m.checkpoints},
            {"layers", m.layers},
            {"entries", entries}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

store_manifest make_manifest(std::vector<manifest_entry> entries) {
  store_manifest m;
  std::set<std::string> langs;
  std::set<std::int64_t> ckpts;
  std::set<int> layers;
  for (const auto& e : entries) {
    langs.insert(e.language);
    ckpts.insert(e.checkpoint);
    layers.insert(e.layer);
  }
  m.languages.assign(langs.begin(), langs.end());
  m.checkpoints.assign(ckpts.begin(), ckpts.end());
  m.layers.assign(layers.begin(), layers.end());
  m.entries = std::move(entries);
  return m;
}

embedding_store embedding_store::open(const fs::path& manifest_path) {
  embedding_store s;
  s.manifest_ = read_manifest(manifest_path);
  s.root_ = manifest_path.parent_path();
  std::map<std::int64_t, std::uint64_t> dims;
  for (const auto& e : s.manifest_.entries) {
    const fs::path file = s.root_ / e.path;
    if (!fs::exists(file)) throw io_error("manifest references missing file " + file.string());
    const auto h = read_header(file);
    if (h.n_sentences != e.n_sentences || h.dim != e.dim) {
      throw format_error(file.string() + ": header (" + std::to_string(h.n_sentences) + "x" +
                         std::to_string(h.dim) + ") does not match manifest entry (" +
                         std::to_string(e.n_sentences) + "x" + std::to_string(e.dim) + ")");
    }
    if (fs::file_size(file) != payload_bytes(h)) {
      throw format_error(file.string() + ": file size does not match header");
    }
    auto [it, fresh] = dims.emplace(e.checkpoint, e.dim);
    if (!fresh && it->second != e.dim) {
      throw format_error("checkpoint " + std::to_string(e.checkpoint) + " mixes dims " +
                         std::to_string(it->second) + " and " + std::to_string(e.dim));
    }
    auto slot_ptr = std::make_unique<slot>();
    slot_ptr->entry = e;
    cell_key key{e.checkpoint, e.layer, e.language};
    if (!s.slots_.emplace(key, std::move(slot_ptr)).second) {
      throw format_error("duplicate manifest entry for checkpoint " + std::to_string(e.checkpoint) + ", layer " +
                         std::to_string(e.layer) + ", " + e.language);
    }
  }
  return s;
}

bool embedding_store::has(std::int64_t checkpoint, int layer, const std::string& language) const {
  return slots_.contains(cell_key{checkpoint, layer, language});
}

std::shared_ptr<const matrix_view> embedding_store::get(std::int64_t checkpoint, int layer,
                                                        const std::string& language) const {
  auto it = slots_.find(cell_key{checkpoint, layer, language});
  if (it == slots_.end()) {
    throw missing_matrix_error("no matrix for checkpoint " + std::to_string(checkpoint) + ", layer " +
                               std::to_string(layer) + ", language " + language);
  }
  const slot& sl = *it->second;
  std::call_once(sl.once, [&] {
    auto file = std::make_shared<const mapped_file>(root_ / sl.entry.path);
    sl.view = std::make_shared<const matrix_view>(it->first, std::move(file), sl.entry.n_sentences, sl.entry.dim);
  });
  return sl.view;
}

std::vector<float> embedding_store::get_vector(std::int64_t checkpoint, int layer, const std::string& language,
                                               meaning_id id) const {
  auto row = get(checkpoint, layer, language)->vector_for(id);
  return {row.begin(), row.end()};
}

std::size_t embedding_store::dim(std::int64_t checkpoint) const {
  for (const auto& e : manifest_.entries) {
    if (e.checkpoint == checkpoint) return e.dim;
  }
  throw missing_matrix_error("no entries for checkpoint " + std::to_string(checkpoint));
}

}  // namespace abx
