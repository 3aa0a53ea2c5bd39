// Exit-code and flag contract checks for the command-line tool. The binary
// path arrives as argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

int failures = 0;

int exit_code_of(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

void expect(const std::string& what, bool ok) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
  if (!ok) ++failures;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-cli>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path root =
      fs::temp_directory_path() / ("openset_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(root);
  const std::string conf = (root / "ok.conf").string();
  {
    std::ofstream out(conf);
    out << "data = synthetic\nn_classes = 4\nper_class = 6\ndim = 3\n"
           "spread = 50\nstd = 1\nsigma = 5\nseeds = 1\n";
  }

  expect("no subcommand is a usage error",
         exit_code_of(cli) == 1);
  expect("unknown flag is a usage error",
         exit_code_of(cli + " gen --config " + conf + " --bogus") == 1);
  expect("missing required --config is a usage error",
         exit_code_of(cli + " gen") == 1);
  expect("config without sigma is a config error (exit 1)", [&] {
            const std::string bad = (root / "bad.conf").string();
            std::ofstream out(bad);
            out << "data = synthetic\n";
            out.close();
            return exit_code_of(cli + " gen --config " + bad + " --out " +
                                (root / "o0").string()) == 1;
          }());
  expect("missing data file is a data error (exit 2)",
         exit_code_of(cli + " novelty --config " + conf +
                      " --set data=files --set train_file=/nonexistent.csv" +
                      " --set observed_file=/nonexistent.csv" +
                      " --set test_file=/nonexistent.csv --out " +
                      (root / "o1").string()) == 2);
  expect("gen succeeds (exit 0)",
         exit_code_of(cli + " gen --config " + conf + " --out " +
                      (root / "data").string()) == 0);
  expect("re-running into the non-empty directory fails without --force",
         exit_code_of(cli + " gen --config " + conf + " --out " +
                      (root / "data").string()) == 1);
  expect("--force allows overwriting",
         exit_code_of(cli + " gen --config " + conf + " --force --out " +
                      (root / "data").string()) == 0);
  expect("--seed restricts the run to one directory", [&] {
            const fs::path out = root / "single";
            if (exit_code_of(cli + " gen --config " + conf +
                             " --seed 7 --out " + out.string()) != 0) {
              return false;
            }
            return fs::exists(out / "seed7") && !fs::exists(out / "seed1");
          }());
  expect("malformed embedding data is a data error (exit 2)", [&] {
            const fs::path data = root / "data" / "seed1";
            const std::string broken = (root / "broken.csv").string();
            std::ofstream out(broken);
            out << "id,label,split,v0\na,0,train,NaN\n";
            out.close();
            return exit_code_of(cli + " novelty --config " + conf +
                                " --set data=files --set train_file=" + broken +
                                " --set observed_file=" +
                                (data / "observed.csv").string() +
                                " --set test_file=" +
                                (data / "test.csv").string() + " --out " +
                                (root / "o2").string()) == 2;
          }());

  std::error_code ec;
  fs::remove_all(root, ec);
  if (failures > 0) {
    std::printf("%d CLI check(s) failed\n", failures);
    return 1;
  }
  std::printf("all CLI checks passed\n");
  return 0;
}
