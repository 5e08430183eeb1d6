#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <tendonforge/demo.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out, err;
};

const fs::path& work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tf_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  fs::path out = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  fs::path err = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env + (env.empty() ? "" : " ") + "\"" TF_CLI_PATH "\" " +
                    args + " > " + out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// Demo fixtures shared across the suite, generated once.
const tendonforge::DemoFixtures& fixtures() {
  static tendonforge::DemoFixtures fx =
      tendonforge::write_demo_fixtures((work_dir() / "fx").string(), 60, 1e-3, 10);
  return fx;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    for (std::string field; std::getline(ls, field, ',');)
      fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string extract_args(const std::string& out_dir) {
  const auto& fx = fixtures();
  std::string bones;
  for (const auto& b : fx.bone_meshes)
    bones += " --bone " + fs::path(b).stem().string() + "=" + b;
  return "extract-loa --mesh " + fx.muscle_mesh + " --name demo_muscle" + bones +
         " --axis x --out " + out_dir;
}

}  // namespace

TEST_CASE("command line surface") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("no-such-command").code == 2);

  RunResult help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* sub : {"extract-loa", "retarget", "track", "metrics", "demo"})
    CHECK(help.out.find(sub) != std::string::npos);
}

TEST_CASE("tendon extraction matches the committed golden file") {
  fs::path out = work_dir() / "loa_golden";
  RunResult r = run_cli(extract_args(out.string()));
  CHECK(r.code == 0);
  CHECK(r.out.find("demo_muscle: 5 sites (1 wrapping candidates)") !=
        std::string::npos);

  std::string actual = read_file(out / "demo_muscle.tendon.json");
  std::string golden =
      read_file(fs::path(TF_SOURCE_DIR) / "tests/golden/demo_muscle.tendon.json");
  CHECK_MESSAGE(actual == golden, "extracted tendon differs from the golden file");
}

TEST_CASE("extraction failures exit 2 with a diagnostic") {
  RunResult missing = run_cli(
      "extract-loa --mesh /nonexistent/muscle.obj --bone b=/nonexistent/bone.obj");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error:") != std::string::npos);

  fs::path out = work_dir() / "loa_badaxis";
  RunResult bad_axis =
      run_cli(extract_args(out.string()) + " --axis sideways");
  CHECK(bad_axis.code == 2);
  CHECK(bad_axis.err.find("axis") != std::string::npos);
}

TEST_CASE("disabling the spacing threshold keeps every slice") {
  fs::path out = work_dir() / "loa_dense";
  RunResult r = run_cli(extract_args(out.string()) + " --max-dist 0");
  CHECK(r.code == 0);

  std::ifstream in(out / "demo_muscle.tendon.json");
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("sites").size() == j.at("metadata").at("n_slices").get<size_t>());
  CHECK(j.at("config").at("max_dist").get<double>() == 0.0);
}

TEST_CASE("retarget recovers the fixture scale") {
  const auto& fx = fixtures();
  fs::path out = work_dir() / "ret";
  RunResult r = run_cli("retarget --model " + fx.model + " --clip " + fx.clip_csv +
                        " --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("scale:") != std::string::npos);

  std::ifstream meta(out / "metadata.json");
  nlohmann::json j = nlohmann::json::parse(meta);
  double scale = j.at("scale").get<double>();
  CHECK(std::abs(scale - 1.25) < 1e-4);

  auto poses = read_csv_rows(out / "poses.csv");
  CHECK(poses.size() == 11);  // header + one row per clip frame

  // The JSON clip is the same capture, so the fit lands on the same scale.
  fs::path out_j = work_dir() / "ret_json";
  RunResult rj = run_cli("retarget --model " + fx.model + " --clip " +
                         fx.clip_json + " --out " + out_j.string());
  CHECK(rj.code == 0);
  std::ifstream meta_j(out_j / "metadata.json");
  double scale_j = nlohmann::json::parse(meta_j).at("scale").get<double>();
  CHECK(scale_j == doctest::Approx(scale).epsilon(1e-12));
}

TEST_CASE("retarget rejects an empty clip") {
  fs::path clip = work_dir() / "empty_clip.csv";
  std::ofstream(clip) << "frame,marker,x,y,z\n";
  RunResult r = run_cli("retarget --model " + fixtures().model + " --clip " +
                        clip.string() + " --out " + (work_dir() / "ret_e").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("clip has no frames") != std::string::npos);
}

TEST_CASE("parallel retargeting is deterministic across worker counts") {
  const auto& fx = fixtures();
  auto run = [&](const std::string& dir, const std::string& extra,
                 const std::string& env) {
    RunResult r = run_cli("retarget --model " + fx.model + " --clip " +
                              fx.clip_csv + " --out " + dir + " --parallel " + extra,
                          env);
    REQUIRE(r.code == 0);
    return read_file(fs::path(dir) / "poses.csv") +
           read_file(fs::path(dir) / "metadata.json");
  };
  std::string one = run((work_dir() / "par1").string(), "--threads 1", "");
  std::string four = run((work_dir() / "par4").string(), "--threads 4", "");
  std::string env = run((work_dir() / "par_env").string(), "--threads 0",
                        "TENDON_FORGE_THREADS=3");
  CHECK(one == four);
  CHECK(one == env);
}

TEST_CASE("tracking writes a full report with monotone accepted cost") {
  const auto& fx = fixtures();
  fs::path out = work_dir() / "trk";
  RunResult r = run_cli("track --problem " + fx.problem + " --out " + out.string() +
                        " --horizon 30 --max-iterations 6");
  CHECK(r.code == 0);
  CHECK(r.out.find("final cost:") != std::string::npos);
  for (const char* f :
       {"trajectory.csv", "costs.csv", "markers.csv", "terms.csv", "error.csv"})
    CHECK_MESSAGE(fs::exists(out / f), f);

  auto costs = read_csv_rows(out / "costs.csv");
  REQUIRE(costs.size() > 1);
  REQUIRE(costs[0][1] == "cost");
  REQUIRE(costs[0][5] == "accepted");
  double prev = std::numeric_limits<double>::infinity();
  int accepted = 0;
  for (size_t i = 1; i < costs.size(); ++i) {
    if (std::stod(costs[i][5]) != 1.0) continue;
    double cost = std::stod(costs[i][1]);
    CHECK(cost < prev);
    prev = cost;
    ++accepted;
  }
  CHECK(accepted > 0);

  auto error = read_csv_rows(out / "error.csv");
  CHECK(error.size() == 32);  // header + horizon+1 steps

  // Bitwise reproducibility of the whole report.
  fs::path out2 = work_dir() / "trk_repeat";
  RunResult r2 = run_cli("track --problem " + fx.problem + " --out " +
                         out2.string() + " --horizon 30 --max-iterations 6");
  REQUIRE(r2.code == 0);
  for (const char* f : {"trajectory.csv", "costs.csv", "markers.csv", "error.csv"})
    CHECK(read_file(out / f) == read_file(out2 / f));
}

TEST_CASE("switched activation mode is selectable") {
  fs::path out = work_dir() / "trk_switched";
  RunResult r = run_cli("track --problem " + fixtures().problem + " --out " +
                        out.string() +
                        " --horizon 10 --max-iterations 2 --mode switched");
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "trajectory.csv"));
}

TEST_CASE("a zero-horizon problem is rejected") {
  std::ifstream in(fixtures().problem);
  nlohmann::json j = nlohmann::json::parse(in);
  j["horizon"] = 0;
  fs::path bad = fs::path(fixtures().problem).parent_path() / "problem_zero.json";
  std::ofstream(bad) << j.dump(2) << "\n";

  RunResult r = run_cli("track --problem " + bad.string() + " --out " +
                        (work_dir() / "trk_zero").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("horizon") != std::string::npos);
}

TEST_CASE("solver divergence exits 3") {
  RunResult r = run_cli("track --problem " + fixtures().problem + " --out " +
                        (work_dir() / "trk_div").string() +
                        " --dt 1e6 --max-iterations 2");
  CHECK(r.code == 3);
  CHECK(r.err.find("diverged") != std::string::npos);
}

TEST_CASE("metrics of a file against itself is zero") {
  const auto& fx = fixtures();
  fs::path out = work_dir() / "met_self";
  fs::create_directories(out);
  fs::path csv = out / "metrics.csv";
  RunResult r = run_cli("metrics " + fx.reference + " " + fx.reference +
                        " --out " + csv.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("mean 0 m, max 0 m") != std::string::npos);

  auto rows = read_csv_rows(csv);
  REQUIRE(rows.size() > 1);
  for (size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) == 0.0);
}

TEST_CASE("metrics reports the documented offset fixture") {
  // Marker a displaced by (3, 4), marker b identical: mean error (5 + 0)/2.
  fs::path a = work_dir() / "met_a.csv";
  fs::path b = work_dir() / "met_b.csv";
  std::ofstream(a) << "t,a.x,a.y,b.x,b.y\n0,0,0,1,1\n0.01,0.2,-0.3,1,1\n";
  std::ofstream(b) << "t,a.x,a.y,b.x,b.y\n0,3,4,1,1\n0.01,3.2,3.7,1,1\n";
  fs::path csv = work_dir() / "met_offset.csv";
  RunResult r = run_cli("metrics " + a.string() + " " + b.string() + " --out " +
                        csv.string());
  CHECK(r.code == 0);

  auto rows = read_csv_rows(csv);
  REQUIRE(rows.size() == 3);
  for (size_t i = 1; i < rows.size(); ++i)
    CHECK(std::stod(rows[i][1]) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("metrics rejects mismatched marker sets") {
  fs::path a = work_dir() / "met_mis_a.csv";
  fs::path c = work_dir() / "met_mis_c.csv";
  std::ofstream(a) << "t,a.x,a.y,b.x,b.y\n0,0,0,1,1\n";
  std::ofstream(c) << "t,a.x,a.y,c.x,c.y\n0,0,0,1,1\n";
  RunResult r = run_cli("metrics " + a.string() + " " + c.string() + " --out " +
                        (work_dir() / "met_mis.csv").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("marker sets differ") != std::string::npos);
}

TEST_CASE("demo pipeline produces every artifact") {
  fs::path out = work_dir() / "demo";
  RunResult r =
      run_cli("demo --out " + out.string() + " --horizon 20 --frames 6");
  CHECK(r.code == 0);
  CHECK(r.out.find("fixtures written") != std::string::npos);
  for (const char* f :
       {"model.json", "reference.csv", "problem.json", "clip.csv", "clip.json",
        "demo_muscle.obj", "femur.obj", "tibia.obj", "demo_muscle.tendon.json",
        "poses.csv", "metadata.json", "trajectory.csv", "costs.csv",
        "markers.csv", "terms.csv", "error.csv", "metrics.csv"})
    CHECK_MESSAGE(fs::exists(out / f), f);
}

TEST_CASE("bundled model asset matches the generator") {
  std::string shipped =
      read_file(fs::path(TF_SOURCE_DIR) / "assets/demo_limb.json");
  std::string generated = read_file(fixtures().model);
  CHECK_MESSAGE(shipped == generated,
                "assets/demo_limb.json is stale; regenerate it from the demo");
}
