#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace precise::testing_util {

inline std::string write_temp(const std::string& name, const std::string& contents) {
  const std::string path = ::testing::TempDir() + "/" + name;
  std::ofstream out(path, std::ios::binary);
  out << contents;
  return path;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One JSONL record with numeric probabilities and optional gold labels
// (label < 0 means absent).
inline std::string jsonl_query(const std::string& id, const std::string& split, std::initializer_list<double> probs,
                               std::initializer_list<int> labels = {}) {
  std::ostringstream os;
  os << R"({"query_id":")" << id << R"(","split":")" << split << R"(","docs":[)";
  auto lab = labels.begin();
  int rank = 1;
  for (double p : probs) {
    if (rank > 1) os << ',';
    os << R"({"doc_id":")" << id << "-" << rank << R"(","rank":)" << rank << R"(,"prob":)" << p;
    if (lab != labels.end()) {
      if (*lab >= 0) os << R"(,"gold_relevant":)" << (*lab ? "true" : "false");
      ++lab;
    }
    os << '}';
    ++rank;
  }
  os << "]}\n";
  return os.str();
}

}  // namespace precise::testing_util
