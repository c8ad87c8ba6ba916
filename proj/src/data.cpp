#include "crdnd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace crdnd {

namespace {

constexpr std::size_t kPixelBytes = 3 * 32 * 32;

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'", 0);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

ImageBatch Dataset::gather(const std::vector<std::size_t>& indices) const {
  ImageBatch b;
  b.images = Tensor<float>({indices.size(), 3, 32, 32});
  b.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= size()) throw InvalidInputError("gather: index out of range");
    std::copy_n(images.data() + i * kPixelBytes, kPixelBytes, b.images.data() + r * kPixelBytes);
    b.labels.push_back(labels[i]);
  }
  return b;
}

ImageBatch Dataset::whole() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(idx);
}

Dataset load_cifar_file(const std::string& path, DataSource source) {
  if (source == DataSource::toy) throw InvalidInputError("toy data has no binary files");
  const bool coarse = source == DataSource::cifar100;
  const std::size_t label_bytes = coarse ? 2 : 1;
  const std::size_t record = label_bytes + kPixelBytes;
  const std::size_t k = coarse ? 100 : 10;

  const auto bytes = read_all(path);
  if (bytes.empty() || bytes.size() % record != 0)
    throw FormatError("'" + path + "': size " + std::to_string(bytes.size()) +
                          " is not a multiple of the " + std::to_string(record) +
                          "-byte record",
                      bytes.size() - bytes.size() % record);

  const std::size_t n = bytes.size() / record;
  Dataset ds;
  ds.num_classes = k;
  ds.images = Tensor<float>({n, 3, 32, 32});
  ds.labels.resize(n);
  if (coarse) ds.coarse_labels.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = i * record;
    std::size_t p = off;
    if (coarse) {
      const unsigned char cl = bytes[p++];
      if (cl >= 20) throw FormatError("'" + path + "': coarse label " + std::to_string(cl) +
                                          " out of range",
                                      off);
      ds.coarse_labels[i] = cl;
    }
    const unsigned char fine = bytes[p++];
    if (fine >= k)
      throw FormatError("'" + path + "': label " + std::to_string(fine) + " >= " +
                            std::to_string(k),
                        p - 1);
    ds.labels[i] = fine;
    for (std::size_t j = 0; j < kPixelBytes; ++j)
      ds.images[i * kPixelBytes + j] = static_cast<float>(bytes[p + j]) / 255.0f;
  }
  return ds;
}

std::vector<unsigned char> serialize_cifar(const Dataset& ds, DataSource source) {
  if (source == DataSource::toy) throw InvalidInputError("toy data has no binary form");
  const bool coarse = source == DataSource::cifar100;
  std::vector<unsigned char> out;
  out.reserve(ds.size() * (kPixelBytes + (coarse ? 2 : 1)));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (coarse)
      out.push_back(static_cast<unsigned char>(i < ds.coarse_labels.size() ? ds.coarse_labels[i] : 0));
    out.push_back(static_cast<unsigned char>(ds.labels[i]));
    for (std::size_t j = 0; j < kPixelBytes; ++j) {
      const long v = std::lround(static_cast<double>(ds.images[i * kPixelBytes + j]) * 255.0);
      out.push_back(static_cast<unsigned char>(std::clamp(v, 0L, 255L)));
    }
  }
  return out;
}

Dataset load_cifar_binary(const std::string& data_dir, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (spec.source == DataSource::cifar10) {
    const fs::path base = fs::path(data_dir) / "cifar-10-batches-bin";
    if (spec.split == Split::train)
      for (int i = 1; i <= 5; ++i)
        files.push_back((base / ("data_batch_" + std::to_string(i) + ".bin")).string());
    else
      files.push_back((base / "test_batch.bin").string());
  } else if (spec.source == DataSource::cifar100) {
    const fs::path base = fs::path(data_dir) / "cifar-100-binary";
    files.push_back((base / (spec.split == Split::train ? "train.bin" : "test.bin")).string());
  } else {
    throw InvalidInputError("load_cifar_binary: toy source has no files");
  }

  Dataset all;
  bool first = true;
  for (const auto& f : files) {
    Dataset part = load_cifar_file(f, spec.source);
    if (first) {
      all = std::move(part);
      first = false;
    } else {
      const std::size_t n0 = all.size(), n1 = part.size();
      Tensor<float> merged({n0 + n1, 3, 32, 32});
      std::copy_n(all.images.data(), n0 * kPixelBytes, merged.data());
      std::copy_n(part.images.data(), n1 * kPixelBytes, merged.data() + n0 * kPixelBytes);
      all.images = std::move(merged);
      all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
      all.coarse_labels.insert(all.coarse_labels.end(), part.coarse_labels.begin(),
                               part.coarse_labels.end());
    }
  }
  all.id = to_string(spec.source) + "-" + to_string(spec.split);

  if (spec.subset_size) {
    const std::size_t m = *spec.subset_size;
    if (m > all.size())
      throw InvalidInputError("subset size " + std::to_string(m) + " exceeds split size " +
                              std::to_string(all.size()));
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RngStream rng = RngStream::derive(spec.seed, "subset");
    for (std::size_t i = idx.size() - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_int(static_cast<std::uint32_t>(i + 1))]);
    idx.resize(m);
    ImageBatch sub = all.gather(idx);
    Dataset out;
    out.images = std::move(sub.images);
    out.labels = std::move(sub.labels);
    out.num_classes = all.num_classes;
    out.id = all.id + "-" + std::to_string(m);
    return out;
  }
  return all;
}

Dataset make_toy_dataset(const DatasetSpec& spec, double amplitude, double noise_sigma) {
  const std::size_t k = kToyNumClasses;
  const std::size_t n =
      spec.subset_size.value_or(spec.split == Split::train ? std::size_t{2000} : std::size_t{500});
  if (n == 0) throw InvalidInputError("toy dataset needs at least one example");

  std::vector<std::vector<float>> templates(k, std::vector<float>(kPixelBytes));
  for (std::size_t c = 0; c < k; ++c) {
    RngStream trng = RngStream::derive(spec.seed, "toy-template", c);
    for (auto& v : templates[c]) v = trng.bernoulli(0.5) ? 1.0f : -1.0f;
  }

  Dataset ds;
  ds.num_classes = k;
  ds.images = Tensor<float>({n, 3, 32, 32});
  ds.labels.resize(n);
  ds.id = "toy-" + to_string(spec.split) + "-" + std::to_string(n);
  const std::uint64_t split_tag = spec.split == Split::train ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    ds.labels[i] = static_cast<int>(c);
    RngStream nrng = RngStream::derive(spec.seed, "toy-noise", split_tag, i);
    for (std::size_t j = 0; j < kPixelBytes; ++j) {
      double v = 0.5 + amplitude * templates[c][j];
      if (noise_sigma > 0) v += noise_sigma * nrng.normal();
      ds.images[i * kPixelBytes + j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ds;
}

ImageBatch augment(const ImageBatch& batch, RngStream& rng) {
  constexpr std::size_t H = 32, W = 32, PAD = 4;
  ImageBatch out;
  out.images = Tensor<float>(batch.images.shape());
  out.labels = batch.labels;
  const std::size_t n = batch.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t dy = rng.uniform_int(2 * PAD + 1);
    const std::size_t dx = rng.uniform_int(2 * PAD + 1);
    const bool flip = rng.bernoulli(0.5);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          // coordinates in the zero-padded source
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - PAD;
          std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + dx) - PAD;
          float v = 0.0f;
          if (sy >= 0 && sy < static_cast<std::ptrdiff_t>(H) && sx >= 0 &&
              sx < static_cast<std::ptrdiff_t>(W)) {
            if (flip) sx = W - 1 - sx;
            v = batch.images.at4(i, c, sy, sx);
          }
          out.images.at4(i, c, y, x) = v;
        }
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch,
                                     bool shuffle) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (shuffle) {
    RngStream rng = RngStream::derive(seed, "shuffle", epoch);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_int(static_cast<std::uint32_t>(i + 1))]);
  }
  return idx;
}

void validate_pixel_range(const Tensor<float>& images) {
  for (std::size_t i = 0; i < images.size(); ++i)
    if (!(images[i] >= 0.0f && images[i] <= 1.0f))
      throw InvalidInputError("pixel " + std::to_string(i) + " outside [0,1]");
}

}  // namespace crdnd
