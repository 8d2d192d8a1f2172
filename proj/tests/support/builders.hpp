#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "plabel/annotations.hpp"
#include "plabel/selection.hpp"

namespace plabel::testing {

inline Annotation manual(double x, double y, double w, double h, int c = 1) {
  return Annotation::manual(BBox{x, y, w, h}, CategoryId::of(c));
}

inline Annotation pseudo(double x, double y, double w, double h, int c, double score,
                         int round = 1) {
  return Annotation::pseudo(BBox{x, y, w, h}, CategoryId::of(c), score, round);
}

inline Detection det(std::string image, double x, double y, double w, double h, int c,
                     double score) {
  return Detection{std::move(image), BBox{x, y, w, h}, CategoryId::of(c), score};
}

inline ImageRecord image(std::string id, int width, int height,
                         std::vector<Annotation> annotations = {}) {
  ImageRecord r;
  r.image_id = std::move(id);
  r.width = width;
  r.height = height;
  r.annotations = std::move(annotations);
  return r;
}

// Deleted on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "plabel-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace plabel::testing
