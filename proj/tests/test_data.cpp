#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "crdnd/data.hpp"

using namespace crdnd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "crdnd_data_test";
  fs::create_directories(d);
  return d;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<unsigned char> one_record_cifar10(unsigned char label, unsigned char pixel) {
  std::vector<unsigned char> b;
  b.push_back(label);
  b.insert(b.end(), 3072, pixel);
  return b;
}

}  // namespace

TEST_CASE("cifar10 single-record fixture parses") {
  auto bytes = one_record_cifar10(3, 255);
  const auto path = temp_dir() / "one.bin";
  write_bytes(path, bytes);

  auto ds = load_cifar_file(path.string(), DataSource::cifar10);
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.num_classes == 10);
  for (std::size_t i = 0; i < 3072; ++i) CHECK(ds.images[i] == 1.0f);
}

TEST_CASE("cifar round trip reproduces the original bytes") {
  std::vector<unsigned char> bytes;
  RngStream rng = RngStream::derive(5, "bytes");
  for (int r = 0; r < 4; ++r) {
    bytes.push_back(static_cast<unsigned char>(rng.uniform_int(10)));
    for (int j = 0; j < 3072; ++j)
      bytes.push_back(static_cast<unsigned char>(rng.uniform_int(256)));
  }
  const auto path = temp_dir() / "four.bin";
  write_bytes(path, bytes);
  auto ds = load_cifar_file(path.string(), DataSource::cifar10);
  REQUIRE(ds.size() == 4);
  auto round = serialize_cifar(ds, DataSource::cifar10);
  CHECK(round == bytes);
}

TEST_CASE("cifar100 records carry coarse then fine labels") {
  std::vector<unsigned char> bytes;
  bytes.push_back(7);   // coarse
  bytes.push_back(42);  // fine
  bytes.insert(bytes.end(), 3072, 128);
  const auto path = temp_dir() / "c100.bin";
  write_bytes(path, bytes);
  auto ds = load_cifar_file(path.string(), DataSource::cifar100);
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 42);
  CHECK(ds.coarse_labels[0] == 7);
  CHECK(ds.num_classes == 100);
  CHECK(serialize_cifar(ds, DataSource::cifar100) == bytes);
}

TEST_CASE("malformed cifar files are rejected with offsets") {
  // truncated record
  auto bytes = one_record_cifar10(1, 0);
  bytes.pop_back();
  const auto p1 = temp_dir() / "trunc.bin";
  write_bytes(p1, bytes);
  CHECK_THROWS_AS(load_cifar_file(p1.string(), DataSource::cifar10), FormatError);

  // label out of range (a byte-reversed record puts a pixel where the label goes)
  auto bad = one_record_cifar10(200, 9);
  const auto p2 = temp_dir() / "badlabel.bin";
  write_bytes(p2, bad);
  try {
    load_cifar_file(p2.string(), DataSource::cifar10);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }
}

TEST_CASE("standard layout loading with subset selection") {
  const auto base = temp_dir() / "layout";
  fs::create_directories(base / "cifar-10-batches-bin");
  std::vector<unsigned char> bytes;
  for (int r = 0; r < 10; ++r) {
    auto rec = one_record_cifar10(static_cast<unsigned char>(r % 10),
                                  static_cast<unsigned char>(r * 20));
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  write_bytes(base / "cifar-10-batches-bin" / "test_batch.bin", bytes);

  DatasetSpec spec;
  spec.source = DataSource::cifar10;
  spec.split = Split::test;
  spec.seed = 9;
  auto full = load_cifar_binary(base.string(), spec);
  CHECK(full.size() == 10);

  spec.subset_size = 4;
  auto a = load_cifar_binary(base.string(), spec);
  auto b = load_cifar_binary(base.string(), spec);
  REQUIRE(a.size() == 4);
  CHECK(a.labels == b.labels);  // stable under a fixed seed
  for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(a.images[i] == b.images[i]);

  spec.subset_size = 11;
  CHECK_THROWS_AS(load_cifar_binary(base.string(), spec), InvalidInputError);
}

TEST_CASE("full cifar distributions parse to standard sizes when present") {
  const char* dir = std::getenv("CRDND_DATA_DIR");
  if (!dir || !fs::exists(fs::path(dir) / "cifar-10-batches-bin")) {
    MESSAGE("CRDND_DATA_DIR not set or CIFAR-10 missing; skipping");
    return;
  }
  DatasetSpec spec;
  spec.source = DataSource::cifar10;
  spec.split = Split::train;
  CHECK(load_cifar_binary(dir, spec).size() == 50000);
  spec.split = Split::test;
  CHECK(load_cifar_binary(dir, spec).size() == 10000);
}

TEST_CASE("toy dataset balance, reproducibility and range") {
  DatasetSpec spec;
  spec.source = DataSource::toy;
  spec.split = Split::train;
  spec.subset_size = 200;
  spec.seed = 4;
  auto a = make_toy_dataset(spec);
  auto b = make_toy_dataset(spec);
  REQUIRE(a.size() == 200);
  CHECK(a.num_classes == 10);

  std::vector<int> counts(10, 0);
  for (int l : a.labels) counts[l]++;
  for (int c : counts) CHECK(c == 20);

  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] == b.images[i]);
    CHECK(a.images[i] >= 0.0f);
    CHECK(a.images[i] <= 1.0f);
  }

  // train and test noise streams differ
  DatasetSpec tspec = spec;
  tspec.split = Split::test;
  auto t = make_toy_dataset(tspec);
  bool differs = false;
  for (std::size_t i = 0; i < 3072 && !differs; ++i)
    differs = t.images[i] != a.images[i];
  CHECK(differs);
}

TEST_CASE("noiseless toy data is solved by the template classifier") {
  DatasetSpec spec;
  spec.source = DataSource::toy;
  spec.split = Split::test;
  spec.subset_size = 100;
  spec.seed = 31;
  auto ds = make_toy_dataset(spec, kToyAmplitude, 0.0);

  // rebuild the templates from the documented recipe
  std::vector<std::vector<float>> templates(10, std::vector<float>(3072));
  for (std::size_t c = 0; c < 10; ++c) {
    RngStream trng = RngStream::derive(spec.seed, "toy-template", c);
    for (auto& v : templates[c]) v = trng.bernoulli(0.5) ? 1.0f : -1.0f;
  }
  int correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double best = -1e30;
    int bestc = -1;
    for (int c = 0; c < 10; ++c) {
      double s = 0;
      for (std::size_t j = 0; j < 3072; ++j)
        s += (ds.images[i * 3072 + j] - 0.5) * templates[c][j];
      if (s > best) {
        best = s;
        bestc = c;
      }
    }
    correct += bestc == ds.labels[i];
  }
  CHECK(correct == 100);
}

TEST_CASE("augmentation is seeded and preserves the pixel range") {
  DatasetSpec spec;
  spec.source = DataSource::toy;
  spec.subset_size = 20;
  spec.seed = 8;
  auto ds = make_toy_dataset(spec);
  auto batch = ds.whole();

  RngStream r1 = RngStream::derive(3, "augment", 0, 0);
  RngStream r2 = RngStream::derive(3, "augment", 0, 0);
  auto a = augment(batch, r1);
  auto b = augment(batch, r2);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] == b.images[i]);
    CHECK(a.images[i] >= 0.0f);
    CHECK(a.images[i] <= 1.0f);
  }
  CHECK(a.labels == batch.labels);

  RngStream r3 = RngStream::derive(3, "augment", 0, 1);
  auto c = augment(batch, r3);
  bool differs = false;
  for (std::size_t i = 0; i < c.images.size() && !differs; ++i)
    differs = c.images[i] != a.images[i];
  CHECK(differs);
}

TEST_CASE("epoch order is a seeded permutation") {
  auto ord = epoch_order(100, 7, 2, true);
  auto again = epoch_order(100, 7, 2, true);
  CHECK(ord == again);
  CHECK(ord != epoch_order(100, 7, 3, true));
  auto sorted = ord;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);

  auto id = epoch_order(5, 7, 0, false);
  for (std::size_t i = 0; i < 5; ++i) CHECK(id[i] == i);
}
