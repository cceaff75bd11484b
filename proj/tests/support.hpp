#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "kahlerlab/curvature.hpp"
#include "kahlerlab/families.hpp"
#include "kahlerlab/scenario.hpp"
#include "kahlerlab/verify.hpp"

#ifndef KAHLERLAB_SOURCE_DIR
#define KAHLERLAB_SOURCE_DIR "."
#endif

namespace kltest {

inline std::filesystem::path source_dir() { return KAHLERLAB_SOURCE_DIR; }

inline std::vector<std::filesystem::path> shipped_scenarios() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(source_dir() / "scenarios"))
    if (e.path().extension() == ".ini") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline kl::ToleranceConfig quick_tol(int samples = 24) {
  kl::ToleranceConfig t;
  t.samples_per_box = samples;
  return t;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline kl::FamilyInstance e1() { return kl::orthotoric_extremal(kl::e1_quartics(), kl::e1_box(), "E1"); }

inline kl::FamilyInstance e1_selfdual() {
  kl::ExtremalQuartics q = kl::e1_quartics();
  q.C1 = -1.0;
  q.C2 = -1.0;
  return kl::orthotoric_extremal(q, kl::e1_box(), "E1-sd");
}

inline const kl::CheckReport& find_check(const std::vector<kl::CheckReport>& rs, const std::string& name) {
  for (const auto& r : rs)
    if (r.name == name) return r;
  throw std::runtime_error("no check named " + name);
}

}  // namespace kltest
