#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dfr/common.hpp"

namespace dfr::nn {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int c = is.get();
    if (c < 0) throw IoError("unexpected end of model file");
    v |= static_cast<std::uint64_t>(c) << (8 * i);
  }
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  std::string s(read_u64(is), '\0');
  is.read(s.data(), static_cast<std::streamsize>(s.size()));
  if (!is) throw IoError("unexpected end of model file");
  return s;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double v = m(r, c);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  auto rows = static_cast<Eigen::Index>(read_u64(is));
  auto cols = static_cast<Eigen::Index>(read_u64(is));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      double v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(r, c) = v;
    }
  if (!is) throw IoError("unexpected end of model file");
  return m;
}

inline void write_vocab(std::ostream& os, const std::vector<std::string>& toks) {
  write_u64(os, toks.size());
  for (const auto& t : toks) write_string(os, t);
}

inline std::vector<std::string> read_vocab(std::istream& is) {
  std::vector<std::string> toks(read_u64(is));
  for (auto& t : toks) t = read_string(is);
  return toks;
}

}  // namespace dfr::nn
