// Binary dataset container.
//
// All integers and floats are little-endian.
//
//   file    := "CMA1" version:u16 count:u64 meta_len:u32 meta:u8[meta_len]
//              record[count]
//   record  := group:u16 n:u16 seed:u64 density:f32 flags:u32
//              voxels:u8[ceil(n^3 / 8)] [properties:f64[property_count]]
//
// Voxel v = i + n*(j + n*k) (x fastest) is bit (v % 8) of byte v / 8, least
// significant bit first. The properties block is present iff
// flags & HasProperties; its order is property_names().

#ifndef CUBATLAS_DATASET_HPP_
#define CUBATLAS_DATASET_HPP_

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "elastica.hpp"
#include "errors.hpp"
#include "homog.hpp"
#include "symgroup.hpp"
#include "voxel_grid.hpp"

static_assert(std::endian::native == std::endian::little,
              "the container codec assumes a little-endian host");

namespace cubatlas {

inline constexpr char dataset_magic[4] = {'C', 'M', 'A', '1'};
inline constexpr std::uint16_t dataset_version = 1;

enum RecordFlag : std::uint32_t {
  Symmetric = 1u << 0,
  PercolatesX = 1u << 1,
  PercolatesY = 1u << 2,
  PercolatesZ = 1u << 3,
  SingleComponent = 1u << 4,
  HasProperties = 1u << 5,
  Valid = 1u << 6,
  GenerationFailed = 1u << 7,
  HomogFailed = 1u << 8,
  Degenerate = 1u << 9,
  Isotropic = 1u << 10,
  Auxetic = 1u << 11,
  Optimal = 1u << 12,
  HighlyAnisotropic = 1u << 13,
  Pentamode = 1u << 14,
  DensityOk = 1u << 15,
};

struct Properties {
  HomogResult homog;
  PropertyRecord props;
};

// Field order of the properties block and of the CSV property columns.
inline const std::vector<std::string>& property_names() {
  static const std::vector<std::string> names = {
      "U_a",    "U_s",    "U_d",     "C11",     "C12",    "C44",    "iter_a", "iter_s",
      "iter_d", "res_a",  "res_s",   "res_d",   "rho",    "E100",   "E111",   "Emax",
      "Emin",   "Emean",  "dE",      "Omega",   "K",      "G_c44",  "G_prime", "G_hill",
      "nu",     "Z",      "eig1",    "eig2",    "eig3",   "eig4",   "eig5",   "eig6",
      "E_norm", "G_norm", "K_norm",  "K_HSU",   "G_HSU",  "E_HSU",  "hydrostatic_cos"};
  return names;
}

inline std::vector<double> flatten(const Properties& p) {
  const HomogResult& h = p.homog;
  const PropertyRecord& r = p.props;
  std::vector<double> v = {h.U_a, h.U_s, h.U_d, h.C11, h.C12, h.C44,
                           static_cast<double>(h.iterations[0]),
                           static_cast<double>(h.iterations[1]),
                           static_cast<double>(h.iterations[2]),
                           h.residuals[0], h.residuals[1], h.residuals[2],
                           r.rho, r.E100, r.E111, r.Emax, r.Emin, r.Emean, r.dE, r.Omega,
                           r.K, r.G_c44, r.G_prime, r.G_hill, r.nu100, r.Z};
  v.insert(v.end(), r.eigs.begin(), r.eigs.end());
  for (double x : {r.E_norm, r.G_norm, r.K_norm, r.K_HSU, r.G_HSU, r.E_HSU,
                   r.dominant_hydrostatic_cos})
    v.push_back(x);
  return v;
}

// Inverse of flatten; the class flags travel in the record flags.
inline Properties unflatten(std::span<const double> v, std::uint32_t flags) {
  if (v.size() != property_names().size())
    throw IoError(IoError::Kind::Format, "property block has the wrong length");
  Properties p;
  HomogResult& h = p.homog;
  PropertyRecord& r = p.props;
  std::size_t i = 0;
  auto next = [&] { return v[i++]; };
  h.U_a = next(), h.U_s = next(), h.U_d = next();
  h.C11 = next(), h.C12 = next(), h.C44 = next();
  for (int& it : h.iterations)
    it = static_cast<int>(next());
  for (double& res : h.residuals)
    res = next();
  r.rho = next(), r.E100 = next(), r.E111 = next(), r.Emax = next(), r.Emin = next();
  r.Emean = next(), r.dE = next(), r.Omega = next(), r.K = next(), r.G_c44 = next();
  r.G_prime = next(), r.G_hill = next(), r.nu100 = next(), r.Z = next();
  for (double& e : r.eigs)
    e = next();
  r.E_norm = next(), r.G_norm = next(), r.K_norm = next();
  r.K_HSU = next(), r.G_HSU = next(), r.E_HSU = next();
  r.dominant_hydrostatic_cos = next();
  r.degenerate = flags & Degenerate;
  r.flags.isotropic = flags & Isotropic;
  r.flags.auxetic = flags & Auxetic;
  r.flags.optimal = flags & Optimal;
  r.flags.highly_anisotropic = flags & HighlyAnisotropic;
  r.flags.pentamode = flags & Pentamode;
  return p;
}

inline std::uint32_t class_bits(const PropertyRecord& r) {
  std::uint32_t f = 0;
  f |= r.degenerate ? Degenerate : 0u;
  f |= r.flags.isotropic ? Isotropic : 0u;
  f |= r.flags.auxetic ? Auxetic : 0u;
  f |= r.flags.optimal ? Optimal : 0u;
  f |= r.flags.highly_anisotropic ? HighlyAnisotropic : 0u;
  f |= r.flags.pentamode ? Pentamode : 0u;
  return f;
}

inline constexpr std::uint32_t class_mask =
    Degenerate | Isotropic | Auxetic | Optimal | HighlyAnisotropic | Pentamode;

struct DatasetRecord {
  std::uint16_t group_number = 0;
  std::uint16_t n = 0;
  std::uint64_t seed = 0;
  float achieved_density = 0;
  std::uint32_t flags = 0;
  std::vector<std::uint8_t> voxels;  // packed
  std::vector<double> properties;    // empty or property_names().size()

  bool has(RecordFlag f) const { return (flags & f) != 0; }
  bool operator==(const DatasetRecord&) const = default;

  std::size_t cells() const { return static_cast<std::size_t>(n) * n * n; }

  VoxelGrid grid() const {
    VoxelGrid g(n);
    for (std::size_t v = 0; v != g.size(); ++v)
      g.set(v, (voxels[v / 8] >> (v % 8)) & 1u);
    return g;
  }

  void set_grid(const VoxelGrid& g) {
    n = static_cast<std::uint16_t>(g.n());
    voxels.assign((g.size() + 7) / 8, 0);
    for (std::size_t v = 0; v != g.size(); ++v)
      if (g[v])
        voxels[v / 8] |= static_cast<std::uint8_t>(1u << (v % 8));
    std::size_t solid = 0;
    for (std::uint8_t b : voxels)
      solid += static_cast<std::size_t>(std::popcount(b));
    achieved_density = static_cast<float>(static_cast<double>(solid) / static_cast<double>(g.size()));
  }

  void set_properties(const Properties& p) {
    properties = flatten(p);
    flags = (flags & ~class_mask) | HasProperties | class_bits(p.props);
  }

  Properties get_properties() const {
    if (!has(HasProperties))
      throw DomainError("record has no properties");
    return unflatten(properties, flags);
  }
};

struct Dataset {
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<DatasetRecord> records;
};

namespace impl {

class Writer {
public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <class T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    os_.write(b, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

private:
  std::ostream& os_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n)
      throw IoError(IoError::Kind::Truncated, "dataset is truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

inline void write_record(Writer& w, const DatasetRecord& r) {
  if (r.group_number < 195 || r.group_number > 230)
    throw DomainError("record group number outside 195..230");
  if (r.voxels.size() != (r.cells() + 7) / 8)
    throw DomainError("record voxel block does not match n");
  const bool props = r.has(HasProperties);
  if (props != !r.properties.empty() ||
      (props && r.properties.size() != property_names().size()))
    throw DomainError("record properties disagree with the has-properties flag");
  w.put(r.group_number);
  w.put(r.n);
  w.put(r.seed);
  w.put(r.achieved_density);
  w.put(r.flags);
  w.bytes(r.voxels.data(), r.voxels.size());
  for (double v : r.properties)
    w.put(v);
}

inline DatasetRecord read_record(Reader& rd) {
  DatasetRecord r;
  r.group_number = rd.get<std::uint16_t>();
  r.n = rd.get<std::uint16_t>();
  r.seed = rd.get<std::uint64_t>();
  r.achieved_density = rd.get<float>();
  r.flags = rd.get<std::uint32_t>();
  if (r.group_number < 195 || r.group_number > 230)
    throw IoError(IoError::Kind::Format, "record group number outside 195..230");
  if (r.n == 0)
    throw IoError(IoError::Kind::Format, "record with n = 0");
  auto vox = rd.bytes((r.cells() + 7) / 8);
  r.voxels.assign(vox.begin(), vox.end());
  if (r.has(HasProperties)) {
    r.properties.resize(property_names().size());
    for (double& v : r.properties)
      v = rd.get<double>();
  }
  return r;
}

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(IoError::Kind::Open, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace impl

inline void write_header(std::ostream& os, const nlohmann::ordered_json& meta, std::uint64_t count) {
  impl::Writer w(os);
  w.bytes(dataset_magic, 4);
  w.put(dataset_version);
  w.put(count);
  const std::string m = meta.dump();
  w.put(static_cast<std::uint32_t>(m.size()));
  w.bytes(m.data(), m.size());
}

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  write_header(os, ds.metadata, ds.records.size());
  impl::Writer w(os);
  for (const DatasetRecord& r : ds.records)
    impl::write_record(w, r);
}

// Writes to a sibling temporary and renames, so readers never see a
// half-written file.
inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError(IoError::Kind::Open, "cannot create " + tmp.string());
    write_dataset(out, ds);
    out.flush();
    if (!out)
      throw IoError(IoError::Kind::Open, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

enum class ReadMode {
  Strict,   // every byte must belong to the declared records
  Recover,  // keep the complete records, drop a torn tail
};

inline Dataset parse_dataset(std::span<const std::uint8_t> buf, ReadMode mode = ReadMode::Strict) {
  impl::Reader rd(buf);
  auto magic = rd.bytes(4);
  if (std::memcmp(magic.data(), dataset_magic, 4) != 0)
    throw IoError(IoError::Kind::BadMagic, "not a dataset file (bad magic)");
  const auto version = rd.get<std::uint16_t>();
  if (version != dataset_version)
    throw IoError(IoError::Kind::Version, "unsupported dataset version " + std::to_string(version));
  const auto count = rd.get<std::uint64_t>();
  const auto meta_len = rd.get<std::uint32_t>();
  auto meta = rd.bytes(meta_len);
  Dataset ds;
  try {
    ds.metadata = nlohmann::ordered_json::parse(meta.begin(), meta.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::Format, std::string("bad metadata: ") + e.what());
  }
  for (std::uint64_t i = 0; i != count; ++i) {
    try {
      ds.records.push_back(impl::read_record(rd));
    } catch (const IoError& e) {
      if (mode == ReadMode::Recover && e.kind == IoError::Kind::Truncated)
        return ds;
      throw;
    }
  }
  if (rd.remaining() != 0 && mode == ReadMode::Strict)
    throw IoError(IoError::Kind::Format, "trailing bytes after the last record");
  return ds;
}

inline Dataset read_dataset(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict) {
  const auto buf = impl::slurp(path);
  return parse_dataset(buf, mode);
}

inline std::size_t encoded_size(const DatasetRecord& r) {
  return 2 + 2 + 8 + 4 + 4 + (r.cells() + 7) / 8 +
         (r.has(HasProperties) ? 8 * property_names().size() : 0);
}

// Appends records to a container on disk and patches the count after each
// batch, so an interrupted run leaves a readable prefix. Opening an
// existing file drops a torn tail left by a crash.
class DatasetAppender {
public:
  DatasetAppender(const std::filesystem::path& path, const nlohmann::ordered_json& metadata)
      : path_(path) {
    if (!std::filesystem::exists(path)) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out)
        throw IoError(IoError::Kind::Open, "cannot create " + path.string());
      write_header(out, metadata, 0);
      if (!out.flush())
        throw IoError(IoError::Kind::Open, "write failed on " + path.string());
      existing_.metadata = metadata;
      return;
    }
    const auto buf = impl::slurp(path);
    existing_ = parse_dataset(buf, ReadMode::Recover);
    std::uint32_t meta_len = 0;
    std::memcpy(&meta_len, buf.data() + 14, 4);
    std::size_t size = 4 + 2 + 8 + 4 + std::size_t{meta_len};
    for (const DatasetRecord& r : existing_.records)
      size += encoded_size(r);
    if (std::filesystem::file_size(path) != size)
      std::filesystem::resize_file(path, size);
    count_ = existing_.records.size();
  }

  const Dataset& existing() const { return existing_; }
  std::uint64_t count() const { return count_; }

  void append(std::span<const DatasetRecord> records) {
    if (records.empty())
      return;
    std::fstream f(path_, std::ios::binary | std::ios::in | std::ios::out);
    if (!f)
      throw IoError(IoError::Kind::Open, "cannot open " + path_.string());
    f.seekp(0, std::ios::end);
    impl::Writer w(f);
    for (const DatasetRecord& r : records)
      impl::write_record(w, r);
    f.flush();
    count_ += records.size();
    f.seekp(4 + 2);
    w.put(count_);
    if (!f.flush())
      throw IoError(IoError::Kind::Open, "write failed on " + path_.string());
  }

private:
  std::filesystem::path path_;
  Dataset existing_;
  std::uint64_t count_ = 0;
};

enum class TensorConvention { N, NPlus1 };

inline const char* to_string(TensorConvention c) {
  return c == TensorConvention::N ? "n" : "n_plus_1";
}

struct ExportedTensor {
  std::vector<std::uint8_t> data;  // x fastest, values 0/1
  int edge = 0;
  nlohmann::ordered_json sidecar;
};

// NPlus1 repeats plane 0 at index n along each axis, closing the period.
inline ExportedTensor export_tensor(const DatasetRecord& r, TensorConvention conv) {
  const VoxelGrid g = r.grid();
  const int n = g.n();
  const int m = conv == TensorConvention::N ? n : n + 1;
  ExportedTensor t;
  t.edge = m;
  t.data.resize(static_cast<std::size_t>(m) * m * m);
  std::size_t o = 0;
  for (int k = 0; k != m; ++k)
    for (int j = 0; j != m; ++j)
      for (int i = 0; i != m; ++i)
        t.data[o++] = g(i % n, j % n, k % n);
  auto& s = t.sidecar;
  s["shape"] = {m, m, m, 1};
  s["dtype"] = "uint8";
  s["order"] = "x-fastest";
  s["index"] = "byte offset = x + e*(y + e*z), e = shape[0]";
  s["convention"] = to_string(conv);
  s["n"] = n;
  s["group_number"] = r.group_number;
  s["relative_density"] = r.achieved_density;
  s["seed"] = r.seed;
  s["flags"] = r.flags;
  if (r.has(HasProperties)) {
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i != r.properties.size(); ++i)
      p[property_names()[i]] = r.properties[i];
    s["properties"] = std::move(p);
  }
  return t;
}

// Writes <stem>.raw and <stem>.json.
inline void write_tensor(const std::filesystem::path& stem, const ExportedTensor& t) {
  std::filesystem::path raw = stem, side = stem;
  raw += ".raw";
  side += ".json";
  std::ofstream out(raw, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError(IoError::Kind::Open, "cannot create " + raw.string());
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  std::ofstream js(side, std::ios::trunc);
  if (!js)
    throw IoError(IoError::Kind::Open, "cannot create " + side.string());
  js << t.sidecar.dump(2) << '\n';
}

// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct CsvReport {
  std::size_t rows = 0;
  std::size_t skipped = 0;  // records without properties
};

inline std::vector<std::string> csv_columns() {
  std::vector<std::string> cols = {"group_number", "bravais", "point_group", "n", "seed",
                                   "achieved_density", "flags", "isotropic", "auxetic",
                                   "optimal", "highly_anisotropic", "pentamode", "degenerate"};
  for (const auto& p : property_names())
    cols.push_back(p);
  return cols;
}

inline CsvReport export_csv(std::ostream& os, std::span<const DatasetRecord> records) {
  const auto cols = csv_columns();
  for (std::size_t i = 0; i != cols.size(); ++i)
    os << (i ? "," : "") << cols[i];
  os << '\n';
  CsvReport rep;
  for (const DatasetRecord& r : records) {
    if (!r.has(HasProperties)) {
      ++rep.skipped;
      continue;
    }
    os << r.group_number << ',' << to_string(bravais_of(r.group_number)) << ','
       << to_string(point_group_of(r.group_number)) << ',' << r.n << ',' << r.seed << ','
       << format_double(r.achieved_density) << ',' << r.flags;
    for (RecordFlag f : {Isotropic, Auxetic, Optimal, HighlyAnisotropic, Pentamode, Degenerate})
      os << ',' << (r.has(f) ? 1 : 0);
    for (double v : r.properties)
      os << ',' << format_double(v);
    os << '\n';
    ++rep.rows;
  }
  return rep;
}

// Column-addressable view of a CSV written by export_csv.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i != header.size(); ++i)
      if (header[i] == name)
        return i;
    throw DomainError("no column named " + std::string(name));
  }
  double number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows[row][col];
    double v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw IoError(IoError::Kind::Format, "not a number: '" + cell + "'");
    return v;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
      const std::size_t c = l.find(',', start);
      out.push_back(l.substr(start, c == std::string::npos ? std::string::npos : c - start));
      if (c == std::string::npos)
        return out;
      start = c + 1;
    }
  };
  if (!std::getline(in, line))
    throw IoError(IoError::Kind::Truncated, "empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw IoError(IoError::Kind::Format, "CSV row has " + std::to_string(cells.size()) +
                                               " cells, header has " +
                                               std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

} // namespace cubatlas

#endif
