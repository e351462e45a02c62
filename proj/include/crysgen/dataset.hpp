#pragma once

#include <cstdint>
#include <vector>

#include "crysgen/crystal.hpp"

namespace crysgen {

// Desk-scale stand-in for the cubic-perovskite benchmark family: ABX3 cells
// on the ideal five-site template, charge-balanced element pools, and a
// radius-driven cell length with per-record jitter.
struct PerovskiteDatasetOptions {
  int count = 3350;
  std::uint64_t seed = 7;
  double length_jitter = 0.25;  // angstrom, uniform
};

std::vector<Crystal> make_perovskite_dataset(const PerovskiteDatasetOptions& opts = {});

// A fixed 16-atom rocksalt cell (memorization fixture).
Crystal make_rocksalt_crystal(double cell = 5.6);

// Train/val/test split by seeded shuffle (60/20/20 by rounding).
struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};
SplitIndices split_dataset(std::size_t n, std::uint64_t seed);

}  // namespace crysgen
