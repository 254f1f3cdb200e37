// indef: command-line front end.
//
//   forward    spec -> m-sample CSV (and optionally the Hamiltonian)
//   inverse    Hamiltonian -> spec
//   roundtrip  spec -> Hamiltonian -> spec, exit 3 when the discrepancy exceeds --tol
//   spectrum   spec -> spectral measure
//   classify   spec -> Herglotz / Stieltjes flags
//   converge   directory of specs (+ limit) -> convergence report
//
// Exit status: 0 ok, 1 parse or validation error, 2 numerical
// non-convergence, 3 tolerance breach.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "indef/io.hpp"

namespace {

using namespace indef;
namespace fs = std::filesystem;

constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitTolerance = 3;

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    io::write_file(out, text);
}

std::vector<cd> grid_or_default(const std::string& path) {
  return path.empty() ? standard_grid() : io::load_grid_csv(path);
}

// Sample positions where w and Upsilon are compared: every breakpoint, from
// both sides, plus a uniform grid.
std::vector<double> comparison_points(const StringSpec& s) {
  std::vector<double> brk;
  for (const auto* m : {&s.omega, &s.upsilon}) {
    for (const auto& a : m->atoms) brk.push_back(a.x);
    for (const auto& p : m->density) {
      brk.push_back(p.a);
      if (!std::isinf(p.b)) brk.push_back(p.b);
    }
  }
  double top = s.infinite_length() ? 1.0 : s.length;
  for (double b : brk) top = std::max(top, s.infinite_length() ? b + 1.0 : top);
  std::vector<double> xs;
  for (int k = 0; k <= 2000; ++k) xs.push_back(top * k / 2000.0);
  for (double b : brk) {
    xs.push_back(b);
    xs.push_back(std::nextafter(b, kInf));
  }
  std::erase_if(xs, [&](double x) { return !(x >= 0.0) || (!s.infinite_length() && x > s.length); });
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

struct Forward {
  std::string spec, grid, out, hamiltonian;
  double tol = 1e-10;
  std::string tail = "exact";
  int jobs = 1;

  int run() const {
    const auto s = io::load_spec(spec);
    WeylOptions o;
    o.prop.tol = tol;
    o.tail = tail == "truncate" ? TailMode::Truncate : TailMode::Exact;
    const auto zs = grid_or_default(grid);
    const auto ms = weyl_grid(s, zs, o, static_cast<unsigned>(jobs));
    std::ostringstream csv;
    write_m_csv(csv, ms);
    emit(out, csv.str());
    if (!hamiltonian.empty()) io::write_file(hamiltonian, io::to_text(io::to_json(string_to_hamiltonian(s))));
    return 0;
  }
};

struct Inverse {
  std::string hamiltonian, out;
  int run() const {
    emit(out, io::to_text(io::to_json(hamiltonian_to_string(io::load_hamiltonian(hamiltonian)))));
    return 0;
  }
};

struct Roundtrip {
  std::string spec, out;
  double tol = 1e-9;
  double mesh = StringToHamiltonianOptions{}.mesh;

  int run() const {
    const auto s = io::load_spec(spec);
    StringToHamiltonianOptions ho;
    ho.mesh = mesh;
    const auto H = string_to_hamiltonian(s, ho);
    const auto back = hamiltonian_to_string(H);
    const double dl = s.infinite_length() && back.infinite_length() ? 0.0 : std::abs(s.length - back.length);
    const CoefficientView a(s), b(back);
    double dw = 0.0, du = 0.0;
    for (double x : comparison_points(s)) {
      const double y = std::min(x, back.length);
      dw = std::max(dw, std::abs(a.w(x) - b.w(y)));
      du = std::max(du, std::abs(a.upsilon(x) - b.upsilon(y)));
    }
    const double worst = std::max({dl, dw, du});
    io::json r{{"length_discrepancy", io::real(dl)},
               {"w_discrepancy", io::real(dw)},
               {"upsilon_discrepancy", io::real(du)},
               {"max_discrepancy", io::real(worst)},
               {"tol", tol},
               {"mesh", H.mesh},
               {"pieces", H.pieces.size()},
               {"pass", worst <= tol}};
    emit(out, io::to_text(r));
    return worst <= tol ? 0 : kExitTolerance;
  }
};

struct Spectrum {
  std::string spec, out, method = "auto";
  std::vector<double> window;
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  int jobs = 1;

  int run() const {
    const auto s = io::load_spec(spec);
    Window w;
    if (!window.empty()) w = {window[0], window[1]};
    const bool discrete =
        !s.infinite_length() && s.omega.purely_atomic() && s.upsilon.purely_atomic();
    const bool use_discrete = method == "discrete" || (method == "auto" && discrete);
    SpectralMeasure mu;
    if (use_discrete) {
      mu = spectral_measure_discrete(s, w);
    } else {
      if (window.empty()) throw Error(ErrorCode::PositionOutOfRange, "inversion needs --window a b");
      InversionOptions o;
      o.eps = eps;
      o.jobs = jobs;
      mu = stieltjes_inversion(s, w, o);
    }
    emit(out, io::to_text(io::to_json(mu)));
    return 0;
  }
};

struct Classify {
  std::string spec, grid, out;
  double tol = 1e-8;
  int jobs = 1;
  int run() const {
    const auto s = io::load_spec(spec);
    const auto zs = grid_or_default(grid);
    emit(out, io::to_text(io::to_json(classify(s, zs, tol, {}, static_cast<unsigned>(jobs)))));
    return 0;
  }
};

struct Converge {
  std::string dir, limit, grid, out;
  double tol = ConvergeOptions{}.tol;
  int points = 19;
  int jobs = 1;

  int run() const {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
      if (e.path().extension() == ".json") files.push_back(e.path());
    if (ec) throw Error(ErrorCode::ParseError, "cannot read directory " + dir);
    if (files.empty()) throw Error(ErrorCode::ParseError, "no .json specs in " + dir);
    std::sort(files.begin(), files.end());

    StringSequence seq;
    for (const auto& f : files) seq.specs.push_back(io::load_spec(f.string()));
    if (!limit.empty()) seq.limit = io::load_spec(limit);
    const double top = seq.limit && !seq.limit->infinite_length() ? seq.limit->length : 1.0;
    std::vector<double> xs;
    for (int k = 1; k <= points; ++k) xs.push_back(top * k / (points + 1));

    ConvergeOptions o;
    o.tol = tol;
    o.jobs = jobs;
    const auto zs = grid_or_default(grid);
    const auto crit = string_convergence_check(seq, xs, o);
    const auto direct = m_comparison(seq, zs, o);
    io::json members = io::json::array();
    for (const auto& f : files) members.push_back(f.filename().string());
    io::json r{{"members", members},
               {"criterion", io::to_json(crit)},
               {"direct", io::to_json(direct)},
               {"verdicts_agree", crit.verdict == direct.verdict}};
    emit(out, io::to_text(r));
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weyl functions, canonical systems and spectral data of generalized indefinite strings"};
  app.require_subcommand(1);

  Forward fw;
  auto* f = app.add_subcommand("forward", "spec -> m-sample CSV");
  f->add_option("--spec", fw.spec, "string spec JSON")->required()->check(CLI::ExistingFile);
  f->add_option("--grid", fw.grid, "CSV of re_z, im_z rows (default: 7x7 grid)")->check(CLI::ExistingFile);
  f->add_option("--out", fw.out, "m-sample CSV (default: stdout)");
  f->add_option("--hamiltonian", fw.hamiltonian, "also write the Hamiltonian JSON here");
  f->add_option("--tol", fw.tol, "propagation tolerance")->check(CLI::PositiveNumber);
  f->add_option("--tail", fw.tail, "half-line tail: exact or truncate")->check(CLI::IsMember({"exact", "truncate"}));
  f->add_option("--jobs", fw.jobs, "worker threads")->check(CLI::PositiveNumber);

  Inverse inv;
  auto* i = app.add_subcommand("inverse", "Hamiltonian JSON -> spec JSON");
  i->add_option("--hamiltonian", inv.hamiltonian, "Hamiltonian JSON")->required()->check(CLI::ExistingFile);
  i->add_option("--out", inv.out, "spec JSON (default: stdout)");

  Roundtrip rt;
  auto* r = app.add_subcommand("roundtrip", "spec -> Hamiltonian -> spec discrepancy report");
  r->add_option("--spec", rt.spec, "string spec JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--tol", rt.tol, "largest accepted discrepancy")->check(CLI::PositiveNumber);
  r->add_option("--mesh", rt.mesh, "travel-coordinate cell for linear w")->check(CLI::PositiveNumber);
  r->add_option("--out", rt.out, "report JSON (default: stdout)");

  Spectrum sp;
  auto* s = app.add_subcommand("spectrum", "spec -> spectral measure JSON");
  s->add_option("--spec", sp.spec, "string spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--window", sp.window, "real window a b")->expected(2);
  s->add_option("--eps", sp.eps, "eps ladder for Stieltjes inversion")->expected(2, 8);
  s->add_option("--method", sp.method, "auto, discrete or inversion")
      ->check(CLI::IsMember({"auto", "discrete", "inversion"}));
  s->add_option("--out", sp.out, "spectral-measure JSON (default: stdout)");
  s->add_option("--jobs", sp.jobs, "worker threads")->check(CLI::PositiveNumber);

  Classify cl;
  auto* c = app.add_subcommand("classify", "spec -> flags JSON");
  c->add_option("--spec", cl.spec, "string spec JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--grid", cl.grid, "CSV of re_z, im_z rows (default: 7x7 grid)")->check(CLI::ExistingFile);
  c->add_option("--tol", cl.tol, "Herglotz tolerance")->check(CLI::PositiveNumber);
  c->add_option("--out", cl.out, "flags JSON (default: stdout)");
  c->add_option("--jobs", cl.jobs, "worker threads")->check(CLI::PositiveNumber);

  Converge cv;
  auto* v = app.add_subcommand("converge", "directory of specs -> convergence report");
  v->add_option("--dir", cv.dir, "directory of family members, ordered by file name")
      ->required()
      ->check(CLI::ExistingDirectory);
  v->add_option("--limit", cv.limit, "limit spec JSON")->check(CLI::ExistingFile);
  v->add_option("--grid", cv.grid, "z-grid CSV for the direct comparison")->check(CLI::ExistingFile);
  v->add_option("--tol", cv.tol, "largest final difference accepted as convergence")->check(CLI::PositiveNumber);
  v->add_option("--points", cv.points, "number of x sample points")->check(CLI::PositiveNumber);
  v->add_option("--out", cv.out, "report JSON (default: stdout)");
  v->add_option("--jobs", cv.jobs, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*f) return fw.run();
    if (*i) return inv.run();
    if (*r) return rt.run();
    if (*s) return sp.run();
    if (*c) return cl.run();
    if (*v) return cv.run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitNumerical : kExitInput;
  }
  return kExitInput;
}
