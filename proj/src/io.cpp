#include "vpb/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vpb/errors.hpp"
#include "vpb/solver.hpp"

namespace vpb {

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string diag_csv_header() {
  return "t,mass,sup_wf,l2_f,grad_phi_sup,null_flux_max,picard_iterations";
}

std::string diag_csv_line(const DiagRow& r) {
  return format_double(r.t) + "," + format_double(r.mass) + "," + format_double(r.sup_wf) + "," +
         format_double(r.l2_f) + "," + format_double(r.grad_phi_sup) + "," + format_double(r.null_flux_max) + "," +
         std::to_string(r.picard_iterations);
}

namespace {

void write_le(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::vector<unsigned char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) buf[8 * i + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_sidecar(const std::filesystem::path& path, const std::string& kind, const std::vector<std::size_t>& shape,
                   const Box& bbox, double t, const std::string& extra) {
  std::ofstream out(path);
  out << "kind " << kind << "\n";
  out << "dtype float64 little-endian\n";
  out << "shape";
  for (auto s : shape) out << " " << s;
  out << "\n";
  out << "bbox " << format_double(bbox.lo[0]) << " " << format_double(bbox.lo[1]) << " " << format_double(bbox.lo[2])
      << " " << format_double(bbox.hi[0]) << " " << format_double(bbox.hi[1]) << " " << format_double(bbox.hi[2])
      << "\n";
  out << "time_stamp " << format_double(t) << "\n";
  out << extra;
}

}  // namespace

void write_distribution_snapshot(const DistributionField& F, const std::filesystem::path& base) {
  write_le(base.string() + ".bin", F.data());
  std::ostringstream extra;
  extra << "layout velocity-major: value[j * n_interior + i]\n";
  extra << "n_x " << F.space().n_x() << "\nn_v " << F.velocity().n() << "\nv_max "
        << format_double(F.velocity().v_max()) << "\n";
  write_sidecar(base.string() + ".txt", "distribution", {F.n_velocity(), F.n_space()}, F.space().domain().bbox(),
                F.time, extra.str());
}

void write_potential_snapshot(const PotentialField& phi, const std::filesystem::path& base) {
  write_le(base.string() + ".bin", phi.box_values());
  const SpatialGrid& g = phi.grid();
  std::ostringstream extra;
  extra << "layout box nodes, last index fastest\n";
  extra << "origin " << format_double(g.origin()[0]) << " " << format_double(g.origin()[1]) << " "
        << format_double(g.origin()[2]) << "\n";
  extra << "spacing " << format_double(g.h()[0]) << " " << format_double(g.h()[1]) << " " << format_double(g.h()[2])
        << "\n";
  const std::size_t d = static_cast<std::size_t>(g.dim());
  write_sidecar(base.string() + ".txt", "potential", {d, d, d}, g.domain().bbox(), phi.time_stamp(), extra.str());
}

SnapshotData read_snapshot(const std::filesystem::path& base) {
  SnapshotData s;
  std::ifstream side(base.string() + ".txt");
  if (!side) throw Error("cannot read " + base.string() + ".txt");
  std::string line;
  while (std::getline(side, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "shape") {
      std::size_t v;
      while (ls >> v) s.shape.push_back(v);
    } else if (key == "time_stamp") {
      ls >> s.time_stamp;
    }
  }
  std::size_t n = 1;
  for (auto v : s.shape) n *= v;
  std::ifstream in(base.string() + ".bin", std::ios::binary);
  std::vector<unsigned char> buf(n * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw Error("truncated snapshot " + base.string());
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(buf[8 * i + b]) << (8 * b);
    s.values[i] = std::bit_cast<double>(u);
  }
  return s;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << "\n";
  }
}

}  // namespace vpb
