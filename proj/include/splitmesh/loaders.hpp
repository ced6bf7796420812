#pragma once

#include <string>
#include <vector>

#include "splitmesh/dataset.hpp"
#include "splitmesh/tensor.hpp"

namespace splitmesh {

// .nt tensor file:
//   magic   4 bytes "NTSR"
//   version u8      1
//   rank    u8      1..8
//   dims    u32 LE  rank entries, each >= 1
//   data    f32 LE  row-major
Tensor read_nt(const std::string& path);
void write_nt(const std::string& path, const Tensor& t);

// RFC-4180-style CSV with a header row; quoted fields and "" escapes accepted.
// Rows with missing/non-numeric cells in the selected columns are dropped and
// counted. Values are returned raw; normalize with zscore_fit/zscore_apply
// against training rows after the shards are decided.
Dataset load_csv(const std::string& path, const std::vector<std::string>& feature_cols,
                 const std::string& label_col);

// Directory with pos/*.nt and neg/*.nt; labels 1 then 0, filename-sorted within
// each class, pos block first. All tensors must share one shape.
Dataset load_tensor_dir(const std::string& path);

// 8-bit binary PGM (P5), values scaled to [0,1], result shape [1,H,W].
Tensor load_pgm(const std::string& path);

// Align-corners bilinear resample of a [C,H,W] tensor.
Tensor bilinear_resize(const Tensor& chw, std::size_t out_h, std::size_t out_w);

}  // namespace splitmesh
