#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <rpcaf/io.hpp>
#include <rpcaf/matrix.hpp>
#include <rpcaf/rng.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using rpcaf::DenseMatrix;

namespace {

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "rpcaf_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("matrix construction validates shape and content") {
  CHECK_THROWS_AS(DenseMatrix(0, 3), rpcaf::DimensionError);
  CHECK_THROWS_AS(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), rpcaf::DimensionError);
  CHECK_THROWS_AS(
      DenseMatrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
      rpcaf::ValueError);
  CHECK_THROWS_AS(
      DenseMatrix(1, 1, {std::numeric_limits<double>::infinity()}),
      rpcaf::ValueError);

  const DenseMatrix id = DenseMatrix::identity(3);
  CHECK(id(0, 0) == 1.0);
  CHECK(id(0, 1) == 0.0);
  CHECK(rpcaf::frobenius_norm(id) == Catch::Approx(std::sqrt(3.0)));
}

TEST_CASE("matrix products match hand-computed values") {
  const DenseMatrix a(2, 3, {1, 2, 3, 4, 5, 6});
  const DenseMatrix b(3, 2, {7, 8, 9, 10, 11, 12});
  const DenseMatrix c = a * b;
  CHECK(c(0, 0) == 58.0);
  CHECK(c(0, 1) == 64.0);
  CHECK(c(1, 0) == 139.0);
  CHECK(c(1, 1) == 154.0);

  const DenseMatrix at_b = rpcaf::transpose_times(a, rpcaf::transpose(b));
  const DenseMatrix manual = rpcaf::transpose(a) * rpcaf::transpose(b);
  CHECK(test_util::max_abs_diff(at_b, manual) == 0.0);

  CHECK_THROWS_AS(a * a, rpcaf::DimensionError);
  CHECK_THROWS_AS(a + b, rpcaf::DimensionError);
}

TEST_CASE("rpf1 identity round trip") {
  const auto path = temp_file("identity.rpf");
  const DenseMatrix m(2, 2, {1, 0, 0, 1});
  rpcaf::write_matrix(m, path);
  const DenseMatrix back = rpcaf::read_matrix(path);
  CHECK(back == m);
}

TEST_CASE("rpf1 smallest file layout is forced by the format") {
  // 8-byte magic + two 4-byte dims + one 8-byte value.
  const auto path = temp_file("single.rpf");
  rpcaf::write_matrix(DenseMatrix(1, 1, {0.0}), path);
  CHECK(fs::file_size(path) == 24);
  const auto bytes = slurp(path);
  CHECK(std::string(bytes.data(), 7) == "RPFMAT1");
  CHECK(bytes[7] == '\0');
  CHECK(bytes[8] == 1);   // rows, little-endian
  CHECK(bytes[12] == 1);  // cols
}

TEST_CASE("rpf1 round trip preserves every bit of a gaussian matrix") {
  rpcaf::SplitMix64 rng(41);
  const DenseMatrix m = test_util::random_matrix(rng, 200, 200);
  const auto path = temp_file("gauss.rpf");
  rpcaf::write_matrix(m, path);
  const DenseMatrix back = rpcaf::read_matrix(path);
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  CHECK(back.entries() == m.entries());

  // write(read(f)) reproduces the file byte for byte
  const auto path2 = temp_file("gauss2.rpf");
  rpcaf::write_matrix(back, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("rpf1 malformed inputs raise typed errors") {
  const auto good = temp_file("good.rpf");
  rpcaf::write_matrix(DenseMatrix(3, 3, std::vector<double>(9, 1.0)), good);

  SECTION("bad magic") {
    auto bytes = slurp(good);
    bytes[0] = 'X';
    const auto bad = temp_file("badmagic.rpf");
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(rpcaf::read_matrix(bad), rpcaf::FormatError);
  }

  SECTION("declared 3x3 with 8 payload values") {
    auto bytes = slurp(good);
    bytes.resize(bytes.size() - 8);
    const auto bad = temp_file("short.rpf");
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(rpcaf::read_matrix(bad), rpcaf::TruncationError);
  }

  SECTION("trailing bytes") {
    auto bytes = slurp(good);
    bytes.push_back('x');
    const auto bad = temp_file("long.rpf");
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(rpcaf::read_matrix(bad), rpcaf::TruncationError);
  }

  SECTION("non-finite payload") {
    auto bytes = slurp(good);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(bytes.data() + 16, &nan, sizeof(nan));
    const auto bad = temp_file("nan.rpf");
    std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK_THROWS_AS(rpcaf::read_matrix(bad), rpcaf::ValueError);
  }

  SECTION("missing file") {
    CHECK_THROWS_AS(rpcaf::read_matrix(temp_file("absent.rpf")),
                    rpcaf::IoError);
  }
}

TEST_CASE("write_matrix rejects non-finite content before touching the file") {
  DenseMatrix m(2, 2);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto path = temp_file("reject.rpf");
  fs::remove(path);
  CHECK_THROWS_AS(rpcaf::write_matrix(m, path), rpcaf::ValueError);
  CHECK(!fs::exists(path));
}

TEST_CASE("csv round trip is value-exact") {
  rpcaf::SplitMix64 rng(99);
  const DenseMatrix m = test_util::random_matrix(rng, 7, 5);
  const auto path = temp_file("m.csv");
  rpcaf::write_csv(m, path);
  const DenseMatrix back = rpcaf::read_csv(path);
  REQUIRE(back.rows() == 7);
  REQUIRE(back.cols() == 5);
  CHECK(back.entries() == m.entries());
}

TEST_CASE("csv rejects ragged rows") {
  const auto path = temp_file("ragged.csv");
  std::ofstream(path) << "1,2,3\n4,5\n";
  CHECK_THROWS_AS(rpcaf::read_csv(path), rpcaf::FormatError);
}
