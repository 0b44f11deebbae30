#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "abx/scorer.hpp"
#include "abx/selection.hpp"

namespace abx {

enum class normalization { raw, per_row_minmax };

struct heatmap_matrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  std::vector<std::vector<double>> values;  // NaN marks a missing cell
  normalization tag = normalization::raw;
};

// (v - min) / (max - min) per row; constant rows become 0.5 everywhere.
// Throws coverage_error on a missing (NaN) cell.
heatmap_matrix normalize_per_row(const heatmap_matrix& matrix);

enum class figure_kind {
  checkpoints_curve,
  layers_curve,
  checkpoint_layer_grid,
  language_checkpoint_grid,
  ld_md_scatter,
  ld_accuracy_scatter,
  winrate_hist,
};

std::string_view to_string(figure_kind kind) noexcept;
figure_kind parse_figure_kind(std::string_view text);
const std::vector<figure_kind>& all_figure_kinds();

struct accuracy_point {
  std::string language;
  std::int64_t checkpoint = 0;
  double accuracy = 0.0;
};

struct transfer_point {
  std::string source;
  std::string target;
  double accuracy = 0.0;
};

struct provenance {
  std::string engine_version;
  std::uint64_t master_seed = 0;
  std::string store_manifest_hash;
  std::vector<int> layers;
  std::vector<std::int64_t> checkpoints;
};

struct figure_inputs {
  std::vector<abx_record> records;     // per-layer cells
  std::vector<int> layers;             // layer set used for averaging; empty = every layer present
  std::optional<std::int64_t> layer_curve_checkpoint;  // default: last checkpoint present
  std::vector<accuracy_point> accuracy;                 // per-language probe accuracy
  std::vector<transfer_point> transfer;                 // source -> target transfer accuracy
  std::vector<double> win_rates;                        // per-target ABX win rates
  std::size_t histogram_bins = 10;
};

// Writes one tidy CSV per requested figure plus figures.json (column schema
// and provenance) into `out_dir`. Returns the files written, sorted. Kinds
// whose optional inputs are absent are skipped; axis gaps raise coverage_error
// listing every missing cell.
std::vector<std::filesystem::path> emit_figure_data(const figure_inputs& inputs, const std::vector<figure_kind>& kinds,
                                                    const std::filesystem::path& out_dir, const provenance& prov);

// Hex FNV-1a digest of a file's bytes (used for the manifest hash).
std::string file_digest(const std::filesystem::path& path);

inline constexpr std::string_view kEngineVersion = "0.1.0";

}  // namespace abx
