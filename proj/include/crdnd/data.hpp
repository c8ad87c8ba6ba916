#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crdnd/rng.hpp"
#include "crdnd/tensor.hpp"

namespace crdnd {

enum class DataSource { cifar10, cifar100, toy };
enum class Split { train, test };

inline std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::cifar10: return "cifar10";
    case DataSource::cifar100: return "cifar100";
    case DataSource::toy: return "toy";
  }
  return "?";
}
inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetSpec {
  DataSource source = DataSource::toy;
  Split split = Split::train;
  std::optional<std::size_t> subset_size;
  bool augmentation = false;
  std::uint64_t seed = 0;
};

struct ImageBatch {
  Tensor<float> images;  // (N, 3, 32, 32), pixels in [0,1]
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct Dataset {
  Tensor<float> images;  // (N, 3, 32, 32)
  std::vector<int> labels;
  std::vector<int> coarse_labels;  // CIFAR-100 superclass bytes, kept for round-trips
  std::size_t num_classes = 10;
  std::string id;

  std::size_t size() const { return labels.size(); }
  ImageBatch gather(const std::vector<std::size_t>& indices) const;
  ImageBatch whole() const;
};

// Parse one CIFAR binary file: records of 1 (CIFAR-10) or 2 (CIFAR-100,
// coarse then fine) label bytes followed by 3072 pixel bytes in R,G,B
// channel planes. Pixels are scaled to [0,1] by /255.
Dataset load_cifar_file(const std::string& path, DataSource source);

// Standard distribution layout under data_dir: cifar-10-batches-bin/
// data_batch_{1..5}.bin + test_batch.bin, cifar-100-binary/train.bin +
// test.bin. Applies seeded subset selection when requested.
Dataset load_cifar_binary(const std::string& data_dir, const DatasetSpec& spec);

// Exact inverse of load_cifar_file for round-trip checks.
std::vector<unsigned char> serialize_cifar(const Dataset& ds, DataSource source);

// Toy recipe: class c has a fixed Rademacher +-1 template T_c drawn from
// stream (seed, "toy-template", c); example pixels are
// clamp(0.5 + amplitude*T_c + sigma*eta, 0, 1) with eta standard normal from
// stream (seed, "toy-noise", split, example). Classes cycle round-robin so
// every prefix is balanced; linearly separable at low sigma.
inline constexpr double kToyAmplitude = 0.08;
inline constexpr double kToyNoiseSigma = 0.10;
inline constexpr std::size_t kToyNumClasses = 10;

Dataset make_toy_dataset(const DatasetSpec& spec, double amplitude = kToyAmplitude,
                         double noise_sigma = kToyNoiseSigma);

// 4-pixel zero-pad, random 32x32 crop, random horizontal flip. Deterministic
// given the stream; intended for train splits only.
ImageBatch augment(const ImageBatch& batch, RngStream& rng);

// Seeded order for one epoch: identity when shuffle is off.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch,
                                     bool shuffle);

void validate_pixel_range(const Tensor<float>& images);

}  // namespace crdnd
