#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nlohmann/json.hpp"
#include "slrkit/manifest.hpp"
#include "slrkit/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slrkit;

namespace {

const std::string kCli = SLRKIT_CLI_PATH;

fs::path work_dir() {
  static const fs::path p = [] {
    const fs::path dir = fs::temp_directory_path() / "slrkit_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return p;
}

int run(const std::string& args) {
  const std::string cmd =
      kCli + " " + args + " >> " + (work_dir() / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json parse_file(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  return json::parse(is);
}

}  // namespace

TEST_CASE("full pipeline and error taxonomy") {
  const fs::path run_dir = work_dir() / "run";

  // prepare
  REQUIRE(run("prepare --synthetic 3 10 --side 50 --seed 4 --run-dir " +
              run_dir.string()) == 0);
  const json split = parse_file(run_dir / "split.json");
  CHECK(split.at("train").size() == 21);
  CHECK(split.at("val").size() == 6);
  CHECK(split.at("test").size() == 3);
  CHECK(split.at("class_names").size() == 3);

  // train: zero epochs is a valid no-op run
  CHECK(run("train --run-dir " + run_dir.string() +
            " --arch tiny --epochs 0") == 0);
  CHECK(parse_file(run_dir / "history.json").at("epochs").empty());

  // unknown architecture is a configuration error (exit 2)
  CHECK(run("train --run-dir " + run_dir.string() + " --arch alexnet") == 2);

  // imagenet backbone without weights is an i/o error (exit 5)
  CHECK(run("train --run-dir " + run_dir.string() +
            " --arch vgg16 --epochs 1") == 5);

  // real training run
  REQUIRE(run("train --run-dir " + run_dir.string() +
              " --arch tiny --epochs 3 --batch 8 --lr 0.001 --seed 5") == 0);
  CHECK(fs::exists(run_dir / "checkpoint/model.json"));
  CHECK(parse_file(run_dir / "history.json").at("epochs").size() == 3);

  // evaluate
  REQUIRE(run("evaluate --run-dir " + run_dir.string()) == 0);
  const json metrics = parse_file(run_dir / "metrics.json");
  CHECK(metrics.at("accuracy").is_number());
  CHECK(metrics.at("per_class").size() == 3);
  CHECK(fs::exists(run_dir / "confusion.png"));
  CHECK(fs::exists(run_dir / "predictions.csv"));

  // metrics recomputed from the persisted predictions agree with metrics.json
  {
    std::ifstream is(run_dir / "predictions.csv");
    std::string line;
    std::getline(is, line);  // header
    std::vector<int> yt, yp;
    while (std::getline(is, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      std::getline(ss, cell, ',');
      yt.push_back(std::stoi(cell));
      std::getline(ss, cell, ',');
      yp.push_back(std::stoi(cell));
    }
    const MetricsReport rep = compute_metrics(confusion_matrix(yt, yp, 3));
    CHECK(rep.accuracy == doctest::Approx(metrics.at("accuracy").get<double>()).epsilon(1e-12));
  }

  // explain: one overlay per class plus a residual report
  REQUIRE(run("explain --run-dir " + run_dir.string() +
              " --classes all --samples 600 --background 8 --seed 3") == 0);
  for (int c = 0; c < 3; ++c) {
    CHECK(fs::exists(run_dir / ("attributions/class_" + std::to_string(c) + "_overlay.png")));
    CHECK(fs::exists(run_dir / ("attributions/class_" + std::to_string(c) + ".attr")));
  }
  const json residuals = parse_file(run_dir / "attributions/residuals.json");
  CHECK(residuals.at("classes").size() == 3);
  for (const auto& r : residuals.at("classes")) CHECK(r.at("pass").get<bool>());

  // report
  REQUIRE(run("report " + run_dir.string() + " --out " +
              (work_dir() / "report").string()) == 0);
  {
    std::ifstream is(work_dir() / "report.csv");
    std::string header, row;
    std::getline(is, header);
    REQUIRE(std::getline(is, row));
    CHECK(row.rfind("tiny,", 0) == 0);
  }

  // manifest is complete
  const RunManifest m = load_manifest(run_dir / "manifest.json");
  CHECK(missing_artifacts(m, run_dir).empty());

  // data errors exit 3
  CHECK(run("prepare /nonexistent_dataset --run-dir " +
            (work_dir() / "bad").string()) == 3);
  // missing manifest is an i/o error (exit 5)
  CHECK(run("evaluate --run-dir " + (work_dir() / "nothing").string()) == 5);
}
