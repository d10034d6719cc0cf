#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "wetpred/error.hpp"
#include "wetpred/io.hpp"

using namespace wetpred;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("wetpred_io_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

double col(const Dataset& d, Eigen::Index row, const std::string& name) {
  return d.features(row, static_cast<Eigen::Index>(*d.column_index(name)));
}

double oracle_angle(const Dataset& d, Eigen::Index i) {
  const double pi = std::acos(-1.0);
  const double f = col(d, i, "cf2_area_fraction") + 0.6 * col(d, i, "cf3_area_fraction") -
                   1.2 * col(d, i, "cn_area_fraction") - 0.3 * col(d, i, "co_area_fraction") + 0.1;
  const double theta0 = 90 + 70 * std::tanh(2.5 * f);
  const double r = 1 + 0.5 * std::tanh(std::log(col(d, i, "roughness_sa_nm") / 200));
  const double c = std::tanh(r * std::atanh(0.98 * std::cos(theta0 * pi / 180)));
  const double theta = std::acos(c) * 180 / pi + 4 * std::tanh(std::log(col(d, i, "R5R5_energy") / 40));
  return std::clamp(theta, 0.0, 180.0);
}

ensemble::PipelineConfig small_pipeline() {
  ensemble::PipelineConfig p;
  p.select_k = 8;
  p.selection_runs = 2;
  p.selection_forest.trees = 10;
  p.ensemble.members = 2;
  p.ensemble.arch.hidden = {8, 8};
  p.ensemble.train.max_epochs = 10;
  return p;
}

} // namespace

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(i % 30) - 15);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(3.0) == "3");
}

TEST_CASE("csv") {
  const std::string text = "id,a,b,contact_angle\ns1,1.5,-2,120\ns2,0.25,3e-05,45.5\ns3,7,8,0\n";

  SUBCASE("parse") {
    const auto d = io::parse_csv(text);
    CHECK(d.ids == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(d.columns == std::vector<std::string>{"a", "b"});
    CHECK(d.features(1, 1) == 3e-05);
    CHECK(d.target(1) == 45.5);
  }

  SUBCASE("round trip is byte-equal") {
    const auto d = io::parse_csv(text);
    CHECK(io::format_csv(d) == text);
    TempDir dir;
    io::save_csv(d, dir.path / "x.csv");
    CHECK(io::read_file(dir.path / "x.csv") == text);
    CHECK(io::format_csv(io::load_csv(dir.path / "x.csv")) == text);
  }

  SUBCASE("quoted fields, CRLF and BOM") {
    const auto d = io::parse_csv("\xEF\xBB\xBF\"id\",x,contact_angle\r\n\"a,b\",1,2\r\n");
    CHECK(d.ids[0] == "a,b");
    CHECK(d.features(0, 0) == 1.0);
  }

  SUBCASE("ids default to row numbers") {
    const auto d = io::parse_csv("a,contact_angle\n1,2\n3,4\n");
    CHECK(d.ids == std::vector<std::string>{"1", "2"});
  }

  SUBCASE("custom column names") {
    io::CsvOptions opt;
    opt.target_name = "theta";
    opt.id_name = "sample";
    const auto d = io::parse_csv("sample,theta,x\nq,10,4\n", opt);
    CHECK(d.ids[0] == "q");
    CHECK(d.target(0) == 10.0);
    CHECK(d.columns == std::vector<std::string>{"x"});
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(io::parse_csv("id,a\ns1,1\n"), MissingTarget);
    io::CsvOptions opt;
    opt.require_target = false;
    CHECK_FALSE(io::parse_csv("id,a\ns1,1\n", opt).has_target());
    CHECK_THROWS_AS(io::parse_csv(""), EmptyFile);
    CHECK_THROWS_AS(io::parse_csv("id,a,contact_angle\n"), EmptyData);
    try {
      io::parse_csv("id,a,contact_angle\ns1,1,2\ns2,NaN,3\n");
      FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
      CHECK(e.line() == 3);
    }
    try {
      io::parse_csv("id,a,contact_angle\ns1,1,2\ns2,1\n");
      FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(io::parse_csv("id,a,contact_angle\ns1,1,181\n"), MalformedRow);
    CHECK_THROWS_AS(io::parse_csv("id,a,contact_angle\ns1,abc,1\n"), MalformedRow);
    CHECK_THROWS_AS(io::load_csv("/nonexistent/file.csv"), FileNotReadable);
  }
}

TEST_CASE("pgm") {
  SUBCASE("ascii 2x2") {
    const auto img = io::parse_pgm("P2\n# comment\n2 2\n255\n0 85\n170 255\n");
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 85, 170, 255});
  }

  SUBCASE("binary round trip") {
    std::mt19937_64 rng(62);
    const auto img = oracle::random_image(64, 64, rng);
    CHECK(io::parse_pgm(io::format_pgm(img)).pixels == img.pixels);
    CHECK(io::parse_pgm(io::format_pgm(img, false)).pixels == img.pixels);
    TempDir dir;
    io::save_image(img, dir.path / "a.pgm");
    const auto back = io::load_image(dir.path / "a.pgm");
    CHECK(back.pixels == img.pixels);
    CHECK(back.width == 64);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(io::parse_pgm("P2\n2 2\n65535\n0 1 2 3\n"), UnsupportedFormat);
    CHECK_THROWS_AS(io::parse_pgm("P3\n2 2\n255\n0 1 2 3\n"), UnsupportedFormat);
    CHECK_THROWS_AS(io::parse_pgm("GIF89a"), CorruptHeader);
    CHECK_THROWS_AS(io::parse_pgm("P2\n2 2\n0\n"), CorruptHeader);
    CHECK_THROWS_AS(io::parse_pgm("P2\n2 2\n255\n0 1 2\n"), TruncatedData);
    CHECK_THROWS_AS(io::parse_pgm(std::string("P5\n2 2\n255\n\x01\x02", 13)), TruncatedData);
    CHECK_THROWS_AS(io::parse_pgm("P2\n2 2\n255\n0 1 2 300\n"), CorruptHeader);
    CHECK_THROWS_AS(io::load_image("/nonexistent.pgm"), FileNotReadable);
  }
}

TEST_CASE("model artifact") {
  const auto data = io::generate_synthetic(60, 2.0, 5);
  const auto cfg = small_pipeline();
  io::ModelArtifact art;
  art.model = ensemble::fit_pipeline(data, cfg, 4);
  art.config_digest = io::config_digest(cfg);
  const std::string text = io::serialize_model(art);

  SUBCASE("predictions survive save and load bit for bit") {
    TempDir dir;
    io::save_model(art, dir.path / "m.json");
    const auto back = io::load_model(dir.path / "m.json");
    CHECK(back.config_digest == art.config_digest);
    CHECK(back.model.selected_features == art.model.selected_features);
    std::mt19937_64 rng(63);
    std::uniform_real_distribution<double> u(0, 300);
    Dataset probe;
    probe.columns = data.columns;
    probe.features = Matrix(100, static_cast<Eigen::Index>(data.columns.size()));
    for (Eigen::Index i = 0; i < probe.features.rows(); ++i) {
      probe.ids.push_back(std::to_string(i));
      for (Eigen::Index j = 0; j < probe.features.cols(); ++j) probe.features(i, j) = u(rng);
    }
    const Vector before = ensemble::predict(art.model, probe);
    const Vector after = ensemble::predict(back.model, probe);
    for (Eigen::Index i = 0; i < 100; ++i)
      CHECK(std::memcmp(&before(i), &after(i), sizeof(double)) == 0);
    CHECK(io::serialize_model(back) == text);
  }

  SUBCASE("tampered version") {
    auto j = nlohmann::json::parse(text);
    j["version"] = io::kArtifactVersion + 1;
    CHECK_THROWS_AS(io::parse_model(j.dump()), VersionMismatch);
  }

  SUBCASE("truncated") {
    CHECK_THROWS_AS(io::parse_model(text.substr(0, text.size() / 2)), CorruptArtifact);
    CHECK_THROWS_AS(io::parse_model(""), CorruptArtifact);
  }

  SUBCASE("inconsistent shapes") {
    auto j = nlohmann::json::parse(text);
    j["format"] = "something-else";
    CHECK_THROWS_AS(io::parse_model(j.dump()), CorruptArtifact);
  }

  SUBCASE("config digest tracks the config") {
    auto other = cfg;
    other.ensemble.train.learning_rate *= 2;
    CHECK(io::config_digest(other) != io::config_digest(cfg));
    CHECK(io::config_digest(cfg) == io::config_digest(small_pipeline()));
  }
}

TEST_CASE("synthetic data") {
  SUBCASE("schema") {
    const auto d = io::generate_synthetic(10, 0.0, 1);
    CHECK(d.columns.size() == 36);
    CHECK(d.columns == io::synthetic_columns());
    CHECK(d.ids.front() == "s1");
    CHECK(d.ids.back() == "s10");
  }

  SUBCASE("noise-free targets equal the oracle") {
    const auto a = io::generate_synthetic(200, 0.0, 9);
    const auto b = io::generate_synthetic(200, 0.0, 9);
    CHECK(a.target == b.target);
    CHECK(a.features == b.features);
    for (Eigen::Index i = 0; i < 200; ++i) {
      CHECK(a.target(i) == io::synthetic_contact_angle(row_span(a.features, i)));
      CHECK(a.target(i) == doctest::Approx(oracle_angle(a, i)).epsilon(1e-12));
    }
  }

  SUBCASE("targets stay in range") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto d = io::generate_synthetic(10000, 30.0, seed);
      CHECK(d.target.minCoeff() >= 0.0);
      CHECK(d.target.maxCoeff() <= 180.0);
    }
  }

  SUBCASE("oracle monotonicity") {
    const auto d = io::generate_synthetic(50, 0.0, 2);
    const auto cn = static_cast<std::size_t>(*d.column_index("cn_area_fraction"));
    const auto cf2 = static_cast<std::size_t>(*d.column_index("cf2_area_fraction"));
    for (Eigen::Index i = 0; i < 50; ++i) {
      std::vector<double> row(row_span(d.features, i).begin(), row_span(d.features, i).end());
      const double base = io::synthetic_contact_angle(row);
      auto up = row;
      up[cn] += 0.05;
      CHECK(io::synthetic_contact_angle(up) <= base);
      auto fl = row;
      fl[cf2] += 0.05;
      CHECK(io::synthetic_contact_angle(fl) >= base);
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(io::generate_synthetic(0, 1.0, 1), EmptyData);
    CHECK_THROWS_AS(io::generate_synthetic(5, -1.0, 1), OutOfRange);
    const std::vector<double> short_row(3, 1.0);
    CHECK_THROWS_AS(io::synthetic_contact_angle(short_row), DimensionMismatch);
  }
}

TEST_CASE("noise-free synthetic data is learnable") {
  const auto data = io::generate_synthetic(1000, 0.0, 21);
  std::vector<std::size_t> train(800), test(200);
  std::iota(train.begin(), train.end(), std::size_t{0});
  std::iota(test.begin(), test.end(), std::size_t{800});
  ensemble::PipelineConfig cfg;
  cfg.selection_forest.trees = 25;
  cfg.selection_forest.max_depth = 6;
  cfg.selection_forest.min_samples_leaf = 5;
  cfg.ensemble.arch.hidden = {64, 64};
  cfg.ensemble.arch.dropout = 0.0;
  cfg.ensemble.train.batch_size = 32;
  cfg.ensemble.train.learning_rate = 3e-3;
  const auto model = ensemble::fit_pipeline(data.subset_rows(train), cfg, 1);
  const auto held = data.subset_rows(test);
  const Vector p = ensemble::predict(model, held);
  const double r2 = ensemble::r2(as_span(held.target), as_span(p));
  MESSAGE("held-out R2 " << r2);
  CHECK(r2 >= 0.98);
}
