#include "mpts/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"

#include "mpts/error.hpp"

namespace mpts {

void Dataset::validate() const {
  if (labels.empty()) throw FormatError(name + ": dataset is empty");
  if (features.rows() != labels.size()) {
    throw FormatError(name + ": " + std::to_string(features.rows()) + " feature rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
      throw FormatError(name + ": label " + std::to_string(labels[i]) + " at row " +
                        std::to_string(i) + " outside [0, " + std::to_string(class_count) + ")");
    }
  }
  if (!features.all_finite()) throw FormatError(name + ": non-finite feature value");
  if (designated_test) {
    for (std::size_t i : *designated_test) {
      if (i >= labels.size()) throw FormatError(name + ": test index out of range");
    }
  }
}

namespace {

// Whole file, transparently gunzipped when compressed.
std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError(path.string() + ": corrupt compressed stream");
  return out;
}

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> bytes, std::string file)
      : bytes_(std::move(bytes)), file_(std::move(file)) {}

  std::uint32_t u32_be(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::span<const unsigned char> take(std::size_t n, const char* what) {
    need(n, what);
    std::span<const unsigned char> s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError(file_ + ": " + std::to_string(bytes_.size() - pos_) +
                        " unexpected trailing bytes at offset " + std::to_string(pos_));
    }
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(file_ + ": truncated " + what + " at offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " bytes, have " +
                        std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::vector<unsigned char> bytes_;
  std::string file_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

void put_u32_be(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  os.write(b, 4);
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  ByteReader img(read_bytes(images), images.string());
  const std::uint32_t magic = img.u32_be("magic");
  if (magic != kImageMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", magic);
    throw FormatError(images.string() + ": bad image magic " + hex + " at offset 0");
  }
  const std::size_t count = img.u32_be("image count");
  const std::size_t rows = img.u32_be("row count");
  const std::size_t cols = img.u32_be("column count");
  const std::size_t dim = rows * cols;
  const auto pixels = img.take(count * dim, "pixel data");
  img.expect_end();

  ByteReader lab(read_bytes(labels), labels.string());
  const std::uint32_t lmagic = lab.u32_be("magic");
  if (lmagic != kLabelMagic) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", lmagic);
    throw FormatError(labels.string() + ": bad label magic " + hex + " at offset 0");
  }
  const std::size_t lcount = lab.u32_be("label count");
  if (lcount != count) {
    throw FormatError(labels.string() + ": label count " + std::to_string(lcount) +
                      " at offset 4 does not match image count " + std::to_string(count));
  }
  const auto lbytes = lab.take(lcount, "label data");
  lab.expect_end();

  Dataset d;
  d.name = images.filename().string();
  d.features = Matrix(count, dim);
  auto f = d.features.data();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(pixels[i]) / 255.0;
  d.labels.assign(lbytes.begin(), lbytes.end());
  int max_label = 0;
  for (int l : d.labels) max_label = std::max(max_label, l);
  d.class_count = count == 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
  d.validate();
  return d;
}

Dataset load_mnist_split(const std::filesystem::path& train_images,
                         const std::filesystem::path& train_labels,
                         const std::filesystem::path& test_images,
                         const std::filesystem::path& test_labels) {
  Dataset train = load_mnist_idx(train_images, train_labels);
  Dataset test = load_mnist_idx(test_images, test_labels);
  if (train.features.cols() != test.features.cols()) {
    throw FormatError("train and test images have different sizes");
  }
  const std::size_t n1 = train.size();
  const std::size_t n2 = test.size();
  std::vector<double> data(train.features.data().begin(), train.features.data().end());
  data.insert(data.end(), test.features.data().begin(), test.features.data().end());
  Dataset d;
  d.name = "mnist";
  d.features = Matrix(n1 + n2, train.features.cols(), std::move(data));
  d.labels = std::move(train.labels);
  d.labels.insert(d.labels.end(), test.labels.begin(), test.labels.end());
  d.class_count = std::max(train.class_count, test.class_count);
  std::vector<std::size_t> t(n2);
  for (std::size_t i = 0; i < n2; ++i) t[i] = n1 + i;
  d.designated_test = std::move(t);
  d.validate();
  return d;
}

void write_mnist_idx(const Dataset& data, std::size_t image_rows, std::size_t image_cols,
                     const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (image_rows * image_cols != data.features.cols()) {
    throw DimensionError("write_mnist_idx: " + std::to_string(image_rows) + "x" +
                         std::to_string(image_cols) + " images but " +
                         std::to_string(data.features.cols()) + " features");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw StateError("cannot open IDX output files");
  put_u32_be(img, kImageMagic);
  put_u32_be(img, static_cast<std::uint32_t>(data.size()));
  put_u32_be(img, static_cast<std::uint32_t>(image_rows));
  put_u32_be(img, static_cast<std::uint32_t>(image_cols));
  for (double v : data.features.data()) {
    const long px = std::lround(v * 255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(std::clamp(px, 0L, 255L))));
  }
  put_u32_be(lab, kLabelMagic);
  put_u32_be(lab, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  const std::string file = path.string();

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw FormatError(file + ": empty file");
  {
    double dummy = 0.0;
    bool all_numeric = true;
    for (const auto& h : header) all_numeric = all_numeric && parse_double(h, dummy);
    if (all_numeric) {
      throw FormatError(file + ": line " + std::to_string(line_no) +
                        ": missing header row (first row is numeric)");
    }
  }
  if (header.size() < 2) throw FormatError(file + ": need at least one feature and a label");

  std::size_t label_col = header.size() - 1;
  if (!label.name.empty()) {
    auto it = std::find(header.begin(), header.end(), label.name);
    if (it == header.end()) {
      throw FormatError(file + ": label column '" + label.name + "' not in header");
    }
    label_col = static_cast<std::size_t>(it - header.begin());
  }

  Dataset d;
  d.name = path.filename().string();
  std::map<std::string, int> codes;
  std::vector<double> values;
  const std::size_t width = header.size();
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw FormatError(file + ": line " + std::to_string(line_no) + ": ragged row with " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_col) continue;
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw FormatError(file + ": line " + std::to_string(line_no) + ", column " +
                          std::to_string(c + 1) + " ('" + header[c] + "'): non-numeric cell '" +
                          cells[c] + "'");
      }
      values.push_back(v);
    }
    const std::string& lab = cells[label_col];
    if (lab.empty()) {
      throw FormatError(file + ": line " + std::to_string(line_no) + ", column " +
                        std::to_string(label_col + 1) + ": empty label");
    }
    auto [it, inserted] = codes.emplace(lab, static_cast<int>(d.label_names.size()));
    if (inserted) d.label_names.push_back(lab);
    d.labels.push_back(it->second);
  }
  if (d.labels.empty()) throw FormatError(file + ": no data rows after header");
  d.features = Matrix(d.labels.size(), width - 1, std::move(values));
  d.class_count = d.label_names.size();
  d.validate();
  return d;
}

void write_label_mapping(const Dataset& data, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < data.label_names.size(); ++c) {
    j[std::to_string(c)] = data.label_names[c];
  }
  std::ofstream os(path);
  if (!os) throw StateError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

Dataset synth_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                    double separation, Rng& rng) {
  if (class_count == 0 || per_class == 0 || dim == 0) {
    throw ParameterError("synth_blobs: counts must be >= 1");
  }
  Matrix centers(class_count, dim);
  for (double& v : centers.data()) v = separation * rng.normal();
  Dataset d;
  d.name = "blobs";
  d.class_count = class_count;
  d.features = Matrix(class_count * per_class, dim);
  for (std::size_t c = 0; c < class_count; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      auto row = d.features.row(c * per_class + i);
      for (std::size_t k = 0; k < dim; ++k) row[k] = centers(c, k) + rng.normal();
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

Standardization standardize(const Dataset& data, std::span<const std::size_t> stat_rows) {
  const std::size_t d = data.features.cols();
  Standardization s{data, std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  if (stat_rows.empty()) throw ParameterError("standardize: no rows for statistics");
  const double n = static_cast<double>(stat_rows.size());
  for (std::size_t r : stat_rows) {
    const auto row = data.features.row(r);
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += row[k];
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t r : stat_rows) {
    const auto row = data.features.row(r);
    for (std::size_t k = 0; k < d; ++k) {
      const double dev = row[k] - s.mean[k];
      s.stddev[k] += dev * dev;
    }
  }
  for (double& v : s.stddev) v = std::sqrt(v / n);
  for (std::size_t k = 0; k < d; ++k) {
    // Constant columns: leave untouched.
    if (s.stddev[k] <= 1e-12 * std::max(1.0, std::abs(s.mean[k]))) continue;
    for (std::size_t r = 0; r < s.data.features.rows(); ++r) {
      double& x = s.data.features(r, k);
      x = (x - s.mean[k]) / s.stddev[k];
    }
  }
  return s;
}

Standardization standardize(const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return standardize(data, all);
}

void assign_holdout_test(Dataset& data, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ParameterError("test fraction must be in [0, 1)");
  }
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const auto k = static_cast<std::size_t>(fraction * static_cast<double>(n));
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  order.resize(k);
  std::sort(order.begin(), order.end());
  data.designated_test = std::move(order);
}

Dataset subsample_pool(const Dataset& data, std::size_t pool_size, Rng& rng) {
  std::vector<char> is_test(data.size(), 0);
  if (data.designated_test) {
    for (std::size_t i : *data.designated_test) is_test[i] = 1;
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!is_test[i]) pool.push_back(i);
  }
  if (pool.size() <= pool_size) return data;
  for (std::size_t i = 0; i < pool_size; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  std::vector<char> keep(is_test);
  for (std::size_t i = 0; i < pool_size; ++i) keep[pool[i]] = 1;

  Dataset out;
  out.name = data.name;
  out.class_count = data.class_count;
  out.label_names = data.label_names;
  std::vector<double> values;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep[i]) continue;
    if (is_test[i]) test.push_back(out.labels.size());
    const auto row = data.features.row(i);
    values.insert(values.end(), row.begin(), row.end());
    out.labels.push_back(data.labels[i]);
  }
  out.features = Matrix(out.labels.size(), data.features.cols(), std::move(values));
  if (data.designated_test) out.designated_test = std::move(test);
  return out;
}

}  // namespace mpts
