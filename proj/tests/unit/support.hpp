#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "dalc/dataset.hpp"
#include "dalc/error.hpp"
#include "dalc/synthetic.hpp"
#include "doctest.h"

namespace support {

inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("dalc_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Runs `fn` and reports the dalc::Error code it threw.
template <class F>
dalc::ErrorCode error_of(F&& fn) {
  try {
    fn();
  } catch (const dalc::Error& e) {
    return e.code();
  }
  FAIL("expected dalc::Error");
  return dalc::ErrorCode::kInvalidArgument;
}

inline dalc::synthetic::SyntheticSpec small_spec(std::size_t domains = 2, std::size_t sentences = 40,
                                                 std::size_t dim = 4) {
  dalc::synthetic::SyntheticSpec s;
  const char* names[] = {"law", "medical", "it", "koran", "subtitles"};
  for (std::size_t i = 0; i < domains; ++i) {
    auto d = dalc::synthetic::domain_at(names[i % 5] + (i >= 5 ? std::to_string(i) : std::string()),
                                        static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, domains - 1)));
    d.vocab_size = 200;
    s.domains.push_back(d);
  }
  s.sentences_per_domain = sentences;
  s.encoder_dim = dim;
  s.anchors = {0, 100, 400};
  s.general_vocab_size = 300;
  s.seed = 7;
  return s;
}

inline dalc::MatrixF random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<float> nd(0.0f, 1.0f);
  dalc::MatrixF m(rows, cols);
  for (auto& v : m.data()) v = nd(rng);
  return m;
}

}  // namespace support
