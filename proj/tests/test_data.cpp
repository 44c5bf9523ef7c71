#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <map>

#include "pirl/data.hpp"

using namespace pirl;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("crafted one-record batch file decodes to a black image labeled 7") {
  TempFile tmp("one_record.bin");
  {
    std::ofstream f(tmp.path, std::ios::binary);
    char label = 7;
    f.write(&label, 1);
    std::vector<char> zeros(3072, 0);
    f.write(zeros.data(), 3072);
  }
  auto imgs = load_cifar_batch_file(tmp.path);
  REQUIRE(imgs.size() == 1);
  CHECK(imgs[0].label == 7);
  CHECK(imgs[0].height == 32);
  CHECK(imgs[0].width == 32);
  for (uint8_t b : imgs[0].data) REQUIRE(b == 0);
}

TEST_CASE("batch file of 10000 records decodes record-exactly") {
  TempFile tmp("full_batch.bin");
  {
    // synthesize a full batch through the exporter: 10,000 x 3073 bytes
    auto data = synth_dataset(10000, 3);
    save_cifar_batch_file(data.images, tmp.path);
    std::ifstream f(tmp.path, std::ios::binary | std::ios::ate);
    CHECK(static_cast<size_t>(f.tellg()) == 10000u * 3073u);
  }
  auto imgs = load_cifar_batch_file(tmp.path);
  CHECK(imgs.size() == 10000);
  CHECK(imgs[0].height == 32);
}

TEST_CASE("file missing the label byte is rejected as truncated-record") {
  TempFile tmp("truncated.bin");
  {
    std::ofstream f(tmp.path, std::ios::binary);
    std::vector<char> bytes(3072, 1);  // one byte short of a record
    f.write(bytes.data(), 3072);
  }
  try {
    load_cifar_batch_file(tmp.path);
    FAIL("expected truncated-record");
  } catch (const invalid_argument_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("truncated-record") != std::string::npos);
    CHECK(msg.find(tmp.path) != std::string::npos);
  }
}

TEST_CASE("synthetic dataset is bit-identical across calls and balanced") {
  auto a = synth_dataset(1000, 42);
  auto b = synth_dataset(1000, 42);
  CHECK(dataset_hash(a) == dataset_hash(b));
  CHECK(a.size() == 1000);
  CHECK(a.labeled());

  std::map<int, int> hist;
  for (int lab : a.labels()) hist[lab]++;
  REQUIRE(hist.size() == 10);
  for (const auto& [cls, count] : hist) {
    (void)cls;
    CHECK(count == 100);
  }

  auto c = synth_dataset(1000, 43);
  CHECK(dataset_hash(a) != dataset_hash(c));
}

TEST_CASE("synthetic dataset round-trips through the CIFAR binary format") {
  auto data = synth_dataset(50, 7);
  TempFile tmp("synth_roundtrip.bin");
  save_cifar_batch_file(data.images, tmp.path);
  auto back = load_cifar_batch_file(tmp.path);
  REQUIRE(back.size() == 50);
  for (size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].label == data.images[i].label);
    REQUIRE(back[i].data == data.images[i].data);
  }
}

TEST_CASE("repeated loads hash identically (purity)") {
  TempFile tmp("purity.bin");
  save_cifar_batch_file(synth_dataset(64, 5).images, tmp.path);
  Dataset d1, d2;
  d1.images = load_cifar_batch_file(tmp.path);
  d2.images = load_cifar_batch_file(tmp.path);
  CHECK(dataset_hash(d1) == dataset_hash(d2));
}

TEST_CASE("channel stats are sane and slice keeps index alignment") {
  auto data = synth_dataset(200, 11);
  auto stats = compute_channel_stats(data);
  for (int c = 0; c < 3; ++c) {
    CHECK(stats.mean[c] > 0.01f);
    CHECK(stats.mean[c] < 0.9f);
    CHECK(stats.stdev[c] > 0.01f);
  }
  auto sl = data.slice(50, 20);
  REQUIRE(sl.size() == 20);
  for (int i = 0; i < 20; ++i) REQUIRE(sl.images[i].data == data.images[50 + i].data);
  CHECK_THROWS_AS(data.slice(190, 20), invalid_argument_error);
}
