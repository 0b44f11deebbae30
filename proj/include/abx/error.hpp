#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace abx {

// Every engine failure derives from abx::error so callers can report it
// uniformly; subclasses exist where callers need to branch on the kind.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public error {
 public:
  using error::error;
};

class format_error : public error {
 public:
  using error::error;
};

// A stored matrix or record violates a documented invariant.
class invariant_error : public error {
 public:
  using error::error;
};

// Requested (checkpoint, layer, language) matrix is not in the store.
class missing_matrix_error : public error {
 public:
  using error::error;
};

// Matrix exists but does not hold the requested meaning id.
class lookup_error : public error {
 public:
  using error::error;
};

class unknown_language_error : public error {
 public:
  using error::error;
};

// A language pair has too few shared meanings to build triplets.
class pair_skipped_error : public error {
 public:
  pair_skipped_error(std::string lang1, std::string lang2, std::size_t shared, std::size_t required)
      : error("pair " + lang1 + "-" + lang2 + " skipped: " + std::to_string(shared) +
              " shared meanings, need " + std::to_string(required)),
        lang1_(std::move(lang1)),
        lang2_(std::move(lang2)),
        shared_(shared) {}

  const std::string& lang1() const noexcept { return lang1_; }
  const std::string& lang2() const noexcept { return lang2_; }
  std::size_t shared() const noexcept { return shared_; }

 private:
  std::string lang1_;
  std::string lang2_;
  std::size_t shared_;
};

class stats_error : public error {
 public:
  using error::error;
};

class coverage_error : public error {
 public:
  using error::error;
};

}  // namespace abx
