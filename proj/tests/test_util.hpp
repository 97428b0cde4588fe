#pragma once

#include <filesystem>
#include <string>

#include "dfr/common.hpp"

inline std::string fixture(const std::string& name) {
  return std::string(DFR_FIXTURE_DIR) + "/" + name;
}

// Fresh directory under the build tree; contents are overwritten per test.
inline std::string temp_dir(const std::string& name) {
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / ("dfr_tests_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}
