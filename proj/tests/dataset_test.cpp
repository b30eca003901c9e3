#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cubatlas/dataset.hpp"

using namespace cubatlas;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("cubatlas_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& s) const { return path_ / s; }

private:
  fs::path path_;
};

DatasetRecord random_record(std::mt19937_64& rng, bool with_props) {
  DatasetRecord r;
  r.group_number = static_cast<std::uint16_t>(195 + rng() % 36);
  const int n = 4 * static_cast<int>(1 + rng() % 4);
  VoxelGrid g(n);
  for (std::size_t v = 0; v != g.size(); ++v)
    g.set(v, rng() % 3 != 0);
  r.set_grid(g);
  r.seed = rng();
  r.flags |= Symmetric | Valid;
  if (with_props) {
    Properties p;
    p.homog.C11 = 1000 + static_cast<double>(rng() % 1000) / 7;
    p.homog.C12 = 300 + static_cast<double>(rng() % 100) / 3;
    p.homog.C44 = 200 + static_cast<double>(rng() % 100) / 11;
    p.homog.iterations = {12, 30, 7};
    p.homog.residuals = {1e-7, 3e-7, 9.5e-7};
    p.props = summarize({p.homog.C11, p.homog.C12, p.homog.C44}, r.achieved_density, Material{});
    r.set_properties(p);
  }
  return r;
}

std::vector<std::uint8_t> bytes_of(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

Dataset sample_dataset(int count) {
  std::mt19937_64 rng(99);
  Dataset ds;
  ds.metadata["format"] = "test";
  ds.metadata["note"] = {{"k", 1}};
  for (int i = 0; i != count; ++i)
    ds.records.push_back(random_record(rng, i % 2 == 0));
  return ds;
}

} // namespace

TEST(Dataset, RoundTripOfRandomRecords) {
  const Dataset ds = sample_dataset(100);
  const auto buf = bytes_of(ds);
  const Dataset back = parse_dataset(buf);
  EXPECT_EQ(back.metadata, ds.metadata);
  ASSERT_EQ(back.records.size(), ds.records.size());
  for (std::size_t i = 0; i != ds.records.size(); ++i) {
    ASSERT_EQ(back.records[i], ds.records[i]) << i;
    EXPECT_EQ(back.records[i].grid(), ds.records[i].grid());
  }
  EXPECT_EQ(bytes_of(back), buf);
}

TEST(Dataset, HeaderLayout) {
  Dataset ds;
  ds.metadata = {{"a", 1}};
  const auto buf = bytes_of(ds);
  ASSERT_EQ(buf.size(), 4u + 2 + 8 + 4 + 7);
  EXPECT_EQ(std::string(buf.begin(), buf.begin() + 4), "CMA1");
  EXPECT_EQ(buf[4], 1);
  EXPECT_EQ(buf[5], 0);
  EXPECT_EQ(buf[14], 7);  // meta_len, little-endian
  EXPECT_EQ(std::string(buf.begin() + 18, buf.end()), R"({"a":1})");
}

TEST(Dataset, VoxelBitOrder) {
  VoxelGrid g(4);
  g.set(1, 0, 0, true);   // voxel 1 -> byte 0 bit 1
  g.set(0, 2, 0, true);   // voxel 8 -> byte 1 bit 0
  g.set(3, 3, 3, true);   // voxel 63 -> byte 7 bit 7
  DatasetRecord r;
  r.set_grid(g);
  ASSERT_EQ(r.voxels.size(), 8u);
  EXPECT_EQ(r.voxels[0], 0x02);
  EXPECT_EQ(r.voxels[1], 0x01);
  EXPECT_EQ(r.voxels[7], 0x80);
  EXPECT_FLOAT_EQ(r.achieved_density, 3.0f / 64);
}

TEST(Dataset, PropertiesRoundTripThroughFlags) {
  std::mt19937_64 rng(1);
  const DatasetRecord r = random_record(rng, true);
  const Properties p = r.get_properties();
  EXPECT_EQ(flatten(p), r.properties);
  EXPECT_EQ(p.props.flags, summarize({p.homog.C11, p.homog.C12, p.homog.C44}, p.props.rho,
                                     Material{}).flags);
  EXPECT_EQ(property_names().size(), r.properties.size());
  DatasetRecord bare = random_record(rng, false);
  EXPECT_THROW(bare.get_properties(), DomainError);
}

TEST(Dataset, StrictReadRejectsDamage) {
  const auto buf = bytes_of(sample_dataset(5));
  auto truncated = buf;
  truncated.resize(buf.size() - 10);
  try {
    parse_dataset(truncated);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind, IoError::Kind::Truncated);
  }
  auto magic = buf;
  magic[0] = 'X';
  try {
    parse_dataset(magic);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind, IoError::Kind::BadMagic);
  }
  auto version = buf;
  version[4] = 9;
  try {
    parse_dataset(version);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind, IoError::Kind::Version);
  }
  auto trailing = buf;
  trailing.push_back(0);
  EXPECT_THROW(parse_dataset(trailing), IoError);
}

TEST(Dataset, RecoverKeepsCompletePrefix) {
  const Dataset ds = sample_dataset(6);
  auto buf = bytes_of(ds);
  buf.resize(buf.size() - 3);
  const Dataset back = parse_dataset(buf, ReadMode::Recover);
  ASSERT_EQ(back.records.size(), 5u);
  for (std::size_t i = 0; i != 5; ++i)
    EXPECT_EQ(back.records[i], ds.records[i]);
}

TEST(Dataset, WriteRejectsInconsistentRecords) {
  Dataset ds = sample_dataset(1);
  ds.records[0].group_number = 194;
  EXPECT_THROW(bytes_of(ds), DomainError);
  ds = sample_dataset(1);
  ds.records[0].properties.clear();
  EXPECT_THROW(bytes_of(ds), DomainError);
}

TEST(Dataset, FileWriteAndMissingFile) {
  TempDir dir;
  const Dataset ds = sample_dataset(3);
  write_dataset(dir / "a.cma", ds);
  EXPECT_FALSE(fs::exists(dir / "a.cma.tmp"));
  EXPECT_EQ(read_dataset(dir / "a.cma").records, ds.records);
  try {
    read_dataset(dir / "missing.cma");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind, IoError::Kind::Open);
  }
}

TEST(Appender, AppendsAndPatchesCount) {
  TempDir dir;
  const Dataset ds = sample_dataset(7);
  {
    DatasetAppender app(dir / "x.cma", ds.metadata);
    EXPECT_EQ(app.count(), 0u);
    app.append(std::span(ds.records).first(3));
    app.append(std::span(ds.records).subspan(3, 2));
  }
  EXPECT_EQ(read_dataset(dir / "x.cma").records.size(), 5u);
  {
    DatasetAppender app(dir / "x.cma", ds.metadata);
    EXPECT_EQ(app.count(), 5u);
    app.append(std::span(ds.records).subspan(5));
  }
  const Dataset back = read_dataset(dir / "x.cma");
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.metadata, ds.metadata);
  // same bytes as writing everything at once
  write_dataset(dir / "y.cma", ds);
  EXPECT_EQ(impl::slurp(dir / "x.cma"), impl::slurp(dir / "y.cma"));
}

TEST(Appender, DropsTornTail) {
  TempDir dir;
  const Dataset ds = sample_dataset(4);
  write_dataset(dir / "t.cma", ds);
  // a crash after writing part of a fifth record, before the count patch
  {
    std::ofstream out(dir / "t.cma", std::ios::binary | std::ios::app);
    out.write("\xc3\x00\x10\x00garbage", 11);
  }
  EXPECT_THROW(read_dataset(dir / "t.cma"), IoError);
  DatasetAppender app(dir / "t.cma", ds.metadata);
  EXPECT_EQ(app.count(), 4u);
  EXPECT_EQ(read_dataset(dir / "t.cma").records, ds.records);
}

TEST(Tensor, PeriodicConventions) {
  std::mt19937_64 rng(3);
  const DatasetRecord r = random_record(rng, true);
  const VoxelGrid g = r.grid();
  const int n = g.n();
  const ExportedTensor a = export_tensor(r, TensorConvention::N);
  ASSERT_EQ(a.edge, n);
  ASSERT_EQ(a.data.size(), g.size());
  for (std::size_t v = 0; v != g.size(); ++v)
    ASSERT_EQ(a.data[v], g[v] ? 1 : 0);
  const ExportedTensor b = export_tensor(r, TensorConvention::NPlus1);
  const int m = n + 1;
  ASSERT_EQ(b.edge, m);
  auto at = [&](int i, int j, int k) { return b.data[static_cast<std::size_t>(i + m * (j + m * k))]; };
  for (int k = 0; k != m; ++k)
    for (int j = 0; j != m; ++j) {
      EXPECT_EQ(at(n, j, k), at(0, j, k));
      EXPECT_EQ(at(j, n, k), at(j, 0, k));
      EXPECT_EQ(at(j, k, n), at(j, k, 0));
    }
  EXPECT_EQ(b.sidecar["shape"], nlohmann::ordered_json({m, m, m, 1}));
  EXPECT_EQ(b.sidecar["convention"], "n_plus_1");
  EXPECT_EQ(b.sidecar["group_number"], r.group_number);
  EXPECT_TRUE(b.sidecar["properties"].contains("C11"));
}

TEST(Tensor, WritesRawAndSidecar) {
  TempDir dir;
  std::mt19937_64 rng(4);
  const DatasetRecord r = random_record(rng, false);
  const ExportedTensor t = export_tensor(r, TensorConvention::NPlus1);
  write_tensor(dir / "s", t);
  EXPECT_EQ(fs::file_size(dir / "s.raw"), t.data.size());
  std::ifstream js(dir / "s.json");
  const auto side = nlohmann::ordered_json::parse(js);
  EXPECT_EQ(side["dtype"], "uint8");
  EXPECT_EQ(side["n"], r.n);
  EXPECT_FALSE(side.contains("properties"));
}

TEST(Csv, RowsRoundTripNumbers) {
  const Dataset ds = sample_dataset(10);
  std::stringstream ss;
  const CsvReport rep = export_csv(ss, ds.records);
  EXPECT_EQ(rep.rows, 5u);
  EXPECT_EQ(rep.skipped, 5u);
  const CsvTable t = read_csv(ss);
  EXPECT_EQ(t.header, csv_columns());
  ASSERT_EQ(t.rows.size(), 5u);
  const std::size_t c11 = t.column("C11"), rho = t.column("rho");
  std::size_t row = 0;
  for (const DatasetRecord& r : ds.records) {
    if (!r.has(HasProperties))
      continue;
    const Properties p = r.get_properties();
    EXPECT_EQ(t.number(row, c11), p.homog.C11);  // shortest round-trip text
    EXPECT_EQ(t.number(row, rho), p.props.rho);
    EXPECT_EQ(t.rows[row][t.column("bravais")], to_string(bravais_of(r.group_number)));
    ++row;
  }
  EXPECT_THROW(t.column("nope"), DomainError);
}

TEST(Csv, Deterministic) {
  const Dataset ds = sample_dataset(6);
  std::ostringstream a, b;
  export_csv(a, ds.records);
  export_csv(b, ds.records);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-300), "1e-300");
}

TEST(Csv, RejectsRaggedRows) {
  std::istringstream in("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(in), IoError);
}
