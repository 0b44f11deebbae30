#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unistd.h>

#include "abx/rng.hpp"

namespace fs = std::filesystem;

namespace abx::testing {

temp_dir::temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

temp_dir::~temp_dir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path write_store(const fs::path& dir, const store_spec& spec, const vector_fn& fn) {
  fs::create_directories(dir);
  std::vector<manifest_entry> entries;
  for (auto c : spec.checkpoints) {
    for (int layer : spec.layers) {
      for (const auto& [lang, ids] : spec.meanings) {
        embedding_matrix m;
        m.checkpoint = c;
        m.layer = layer;
        m.language = lang;
        m.dim = spec.dim;
        m.meaning_ids = ids;
        m.vectors.reserve(ids.size() * spec.dim);
        for (auto id : ids) {
          const auto row = fn(c, layer, lang, id);
          m.vectors.insert(m.vectors.end(), row.begin(), row.end());
        }
        const std::string name = "c" + std::to_string(c) + "_l" + std::to_string(layer) + "_" + lang + ".embx";
        write_matrix(m, dir / name);
        entries.push_back({c, layer, lang, name, ids.size(), spec.dim});
      }
    }
  }
  const auto path = dir / "manifest.json";
  write_manifest(make_manifest(std::move(entries)), path);
  return path;
}

vector_fn gaussian_vectors(std::uint64_t seed, std::size_t dim) {
  return [seed, dim](std::int64_t c, int layer, const std::string& lang, meaning_id id) {
    std::uint64_t key = seed_combine(seed, static_cast<std::uint64_t>(c));
    key = seed_combine(key, static_cast<std::uint64_t>(layer));
    key = seed_combine(key, fnv1a64(lang));
    key = seed_combine(key, id);
    std::mt19937_64 gen(key);
    std::normal_distribution<float> normal;
    std::vector<float> row(dim);
    for (auto& v : row) v = normal(gen);
    return row;
  };
}

fs::path write_corpus(const fs::path& path, const meaning_lists& meanings) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& [lang, ids] : meanings) {
    for (auto id : ids) {
      out << nlohmann::json{{"meaning_id", id}, {"language", lang}, {"text", lang + " sentence " + std::to_string(id)}}
                 .dump()
          << '\n';
    }
  }
  return path;
}

meaning_lists full_alignment(const std::vector<std::string>& languages, std::size_t m) {
  meaning_lists out;
  for (const auto& l : languages) {
    for (std::size_t i = 1; i <= m; ++i) out[l].push_back(i);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace abx::testing
