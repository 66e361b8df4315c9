#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mpts/dataio.hpp"
#include "mpts/error.hpp"
#include "mpts/pool.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using mpts::Matrix;
using mpts::Rng;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Two 2x3 images with hand-chosen pixels, labels 7 and 2.
std::vector<std::uint8_t> image_fixture() {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x803);
  put_u32(b, 2);
  put_u32(b, 2);
  put_u32(b, 3);
  for (int v : {0, 255, 51, 102, 0, 1, 254, 128, 0, 0, 17, 255}) b.push_back(static_cast<std::uint8_t>(v));
  return b;
}

std::vector<std::uint8_t> label_fixture() {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x801);
  put_u32(b, 2);
  b.push_back(7);
  b.push_back(2);
  return b;
}

std::string format_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const mpts::FormatError& e) {
    return e.what();
  }
  return "";
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("IDX fixture") {
  TempDir dir("mpts_idx_test");
  write_bytes(dir / "img", image_fixture());
  write_bytes(dir / "lab", label_fixture());
  const auto d = mpts::load_mnist_idx(dir / "img", dir / "lab");
  CHECK(d.size() == 2);
  CHECK(d.features.cols() == 6);
  CHECK(d.labels == std::vector<int>{7, 2});
  CHECK(d.class_count == 8);
  const int pixels[] = {0, 255, 51, 102, 0, 1, 254, 128, 0, 0, 17, 255};
  for (std::size_t i = 0; i < 12; ++i) CHECK(d.features.data()[i] == pixels[i] / 255.0);

  mpts::write_mnist_idx(d, 2, 3, dir / "img2", dir / "lab2");
  CHECK(read_bytes(dir / "img2") == image_fixture());
  CHECK(read_bytes(dir / "lab2") == label_fixture());

  SUBCASE("bad magic") {
    auto b = image_fixture();
    b[3] = 0x04;
    write_bytes(dir / "bad", b);
    CHECK(format_error([&] { mpts::load_mnist_idx(dir / "bad", dir / "lab"); }).find("magic") !=
          std::string::npos);
    auto l = label_fixture();
    l[2] = 0x09;
    write_bytes(dir / "badl", l);
    CHECK_THROWS_AS(mpts::load_mnist_idx(dir / "img", dir / "badl"), mpts::FormatError);
  }
  SUBCASE("truncated") {
    auto b = image_fixture();
    b.pop_back();
    write_bytes(dir / "trunc", b);
    CHECK(format_error([&] { mpts::load_mnist_idx(dir / "trunc", dir / "lab"); }).find("truncated") !=
          std::string::npos);
    write_bytes(dir / "short", {0, 0, 8});
    CHECK_THROWS_AS(mpts::load_mnist_idx(dir / "short", dir / "lab"), mpts::FormatError);
  }
  SUBCASE("count mismatch") {
    std::vector<std::uint8_t> l;
    put_u32(l, 0x801);
    put_u32(l, 3);
    for (int v : {1, 2, 3}) l.push_back(static_cast<std::uint8_t>(v));
    write_bytes(dir / "lab3", l);
    CHECK(format_error([&] { mpts::load_mnist_idx(dir / "img", dir / "lab3"); }).find("count") !=
          std::string::npos);
  }
  SUBCASE("trailing bytes") {
    auto b = image_fixture();
    b.push_back(0);
    write_bytes(dir / "long", b);
    CHECK_THROWS_AS(mpts::load_mnist_idx(dir / "long", dir / "lab"), mpts::FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(mpts::load_mnist_idx(dir / "nope", dir / "lab"), mpts::FormatError);
  }
  SUBCASE("train and test split") {
    const auto s = mpts::load_mnist_split(dir / "img", dir / "lab", dir / "img", dir / "lab");
    CHECK(s.size() == 4);
    REQUIRE(s.designated_test.has_value());
    CHECK(*s.designated_test == std::vector<std::size_t>{2, 3});
  }
}

TEST_CASE("CSV loader") {
  TempDir dir("mpts_csv_test");
  write_text(dir / "ok.csv", "x1,x2,label\n1.5,2,a\n\n3,-4e-1,b\n0,0,a\n");
  const auto d = mpts::load_csv(dir / "ok.csv");
  CHECK(d.labels == std::vector<int>{0, 1, 0});
  CHECK(d.class_count == 2);
  CHECK(d.features == Matrix::from_rows({{1.5, 2}, {3, -0.4}, {0, 0}}));
  CHECK(d.label_names == std::vector<std::string>{"a", "b"});

  write_text(dir / "mid.csv", "kind,x\ncat,1\ndog,2\n");
  const auto m = mpts::load_csv(dir / "mid.csv", {"kind"});
  CHECK(m.labels == std::vector<int>{0, 1});
  CHECK(m.features == Matrix::from_rows({{1}, {2}}));

  write_text(dir / "ragged.csv", "a,b,c\n1,2,x\n1,2\n");
  const auto ragged = format_error([&] { mpts::load_csv(dir / "ragged.csv"); });
  CHECK(ragged.find("line 3") != std::string::npos);

  write_text(dir / "nonnum.csv", "a,b,c\n1,2,x\n1,oops,y\n");
  const auto nonnum = format_error([&] { mpts::load_csv(dir / "nonnum.csv"); });
  CHECK(nonnum.find("line 3") != std::string::npos);
  CHECK(nonnum.find("column 2") != std::string::npos);

  write_text(dir / "nohdr.csv", "1,2,3\n4,5,6\n");
  CHECK(format_error([&] { mpts::load_csv(dir / "nohdr.csv"); }).find("header") != std::string::npos);

  write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(mpts::load_csv(dir / "empty.csv"), mpts::FormatError);
  CHECK_THROWS_AS(mpts::load_csv(dir / "ok.csv", {"nope"}), mpts::FormatError);

  // OpenML-155 shape: 10 features, 9 classes.
  std::string big = "f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,class\n";
  for (int i = 0; i < 45; ++i) {
    for (int j = 0; j < 10; ++j) big += std::to_string(i * j % 7) + ",";
    big += "c" + std::to_string(i % 9) + "\n";
  }
  write_text(dir / "openml.csv", big);
  const auto o = mpts::load_csv(dir / "openml.csv");
  CHECK(o.features.cols() == 10);
  CHECK(o.class_count == 9);
}

TEST_CASE("synthetic blobs") {
  Rng a(1), b(1);
  const auto d1 = mpts::synth_blobs(3, 50, 2, 4.0, a);
  const auto d2 = mpts::synth_blobs(3, 50, 2, 4.0, b);
  CHECK(d1.features == d2.features);
  CHECK(d1.labels == d2.labels);
  CHECK(d1.size() == 150);
  CHECK(d1.class_count == 3);

  // Separation 20 in 2-D, one seeded draw: nearest class mean (a linear rule)
  // is almost perfect.
  Rng r(0);
  const auto d = mpts::synth_blobs(2, 400, 2, 20.0, r);
  std::vector<std::vector<double>> mean(2, std::vector<double>(2, 0.0));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (int j = 0; j < 2; ++j) mean[d.labels[i]][j] += d.features(i, j) / 400.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    int best = 0;
    double bd = INFINITY;
    for (int c = 0; c < 2; ++c) {
      const double dx = d.features(i, 0) - mean[c][0], dy = d.features(i, 1) - mean[c][1];
      if (dx * dx + dy * dy < bd) {
        bd = dx * dx + dy * dy;
        best = c;
      }
    }
    correct += best == d.labels[i];
  }
  CHECK(correct / 800.0 > 0.99);

  // Separation 0: every class is centered at the origin.
  Rng z(9);
  const auto same = mpts::synth_blobs(3, 400, 2, 0.0, z);
  std::vector<std::vector<double>> m0(3, std::vector<double>(2, 0.0));
  for (std::size_t i = 0; i < same.size(); ++i)
    for (int j = 0; j < 2; ++j) m0[same.labels[i]][j] += same.features(i, j) / 400.0;
  for (const auto& m : m0)
    for (double v : m) CHECK(std::abs(v) < 0.25);
}

TEST_CASE("standardization") {
  mpts::Dataset d;
  d.features = Matrix::from_rows({{0, 5}, {2, 5}});
  d.labels = {0, 1};
  d.class_count = 2;
  const auto s = mpts::standardize(d);
  CHECK(s.data.features == Matrix::from_rows({{-1, 5}, {1, 5}}));
  CHECK(s.stddev[0] == 1.0);

  Rng rng(3);
  mpts::Dataset r;
  r.features = oracle::random_matrix(50, 3, rng, 4.0);
  r.labels.assign(50, 0);
  r.class_count = 1;
  const auto once = mpts::standardize(r).data;
  const auto twice = mpts::standardize(once);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(twice.mean[j]) <= 1e-12);
    CHECK(std::abs(twice.stddev[j] - 1.0) <= 1e-12);
  }

  const std::vector<std::size_t> rows{0};
  const auto partial = mpts::standardize(d, rows);
  CHECK(partial.data.features == d.features);  // single row: zero std everywhere
}

TEST_CASE("holdout and subsample") {
  Rng rng(4);
  auto d = mpts::synth_blobs(2, 50, 3, 3.0, rng);
  mpts::assign_holdout_test(d, 0.2, rng);
  REQUIRE(d.designated_test.has_value());
  CHECK(d.designated_test->size() == 20);
  const auto sub = mpts::subsample_pool(d, 30, rng);
  CHECK(sub.size() == 50);
  CHECK(sub.designated_test->size() == 20);
  CHECK(mpts::subsample_pool(d, 1000, rng).size() == 100);
}

TEST_CASE("pool state") {
  Rng rng(5);
  auto data = std::make_shared<mpts::Dataset>(mpts::synth_blobs(4, 25, 2, 3.0, rng));
  Rng a(6), b(6);
  const auto p1 = mpts::init_pool(data, 10, mpts::TestSplit::holdout(0.2), a);
  const auto p2 = mpts::init_pool(data, 10, mpts::TestSplit::holdout(0.2), b);
  CHECK(p1.labeled() == p2.labeled());
  CHECK(p1.test() == p2.test());
  CHECK(p1.labeled().size() == 10);
  CHECK(p1.test().size() == 20);
  CHECK(p1.unlabeled().size() == 70);
  CHECK_NOTHROW(p1.check_invariants());

  const auto full = mpts::init_pool(data, 80, mpts::TestSplit::holdout(0.2), a);
  CHECK(full.unlabeled().empty());
  CHECK_THROWS_AS(mpts::init_pool(data, 81, mpts::TestSplit::holdout(0.2), a), mpts::ParameterError);

  const std::vector<int> bias{1, 3};
  const auto biased = mpts::init_pool(data, 12, mpts::TestSplit::holdout(0.2), a, bias);
  for (std::size_t i : biased.labeled()) CHECK((data->labels[i] == 1 || data->labels[i] == 3));

  CHECK(mpts::label_points(p1, {}).labeled() == p1.labeled());
  const std::vector<std::size_t> pick{p1.unlabeled()[3], p1.unlabeled()[0]};
  const auto p3 = mpts::label_points(p1, pick);
  CHECK(p3.labeled().size() == 12);
  CHECK(p3.labeled()[10] == pick[0]);
  CHECK(p3.unlabeled().size() == 68);
  CHECK_NOTHROW(p3.check_invariants());
  CHECK_THROWS_AS(mpts::label_points(p3, pick), mpts::StateError);
  const std::vector<std::size_t> twice{p3.unlabeled()[0], p3.unlabeled()[0]};
  CHECK_THROWS_AS(mpts::label_points(p3, twice), mpts::StateError);

  const auto everything = mpts::label_points(p1, p1.unlabeled());
  CHECK(everything.unlabeled().empty());
  CHECK(everything.labeled().size() == 80);

  auto tp = p1.training_pool();
  CHECK(std::is_sorted(tp.begin(), tp.end()));
  CHECK(tp.size() == 80);
}
