#include "finsler/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace finsler {

namespace {
constexpr char kMagic[6] = "FNSF1";
}

void write_field(const std::string& path, const ScalarField& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_field: cannot open " + path);
  out.write(kMagic, 5);
  const Grid& g = u.grid;
  const std::int32_t n = g.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (int d = 0; d < 3; ++d) {
    const std::int64_t c = g.cells[d];
    out.write(reinterpret_cast<const char*>(&c), sizeof c);
  }
  out.write(reinterpret_cast<const char*>(g.h.data()), 3 * sizeof(double));
  out.write(reinterpret_cast<const char*>(g.origin.data()), 3 * sizeof(double));
  const std::uint8_t b = (g.boundary == Boundary::periodic) ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&b), 1);
  out.write(reinterpret_cast<const char*>(u.v.data()),
            static_cast<std::streamsize>(u.v.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_field: write failed: " + path);
}

ScalarField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_field: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (std::memcmp(magic, kMagic, 5) != 0) throw std::runtime_error("read_field: bad magic");
  Grid g;
  std::int32_t n;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  g.n = n;
  for (int d = 0; d < 3; ++d) {
    std::int64_t c;
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    g.cells[d] = static_cast<int>(c);
  }
  in.read(reinterpret_cast<char*>(g.h.data()), 3 * sizeof(double));
  in.read(reinterpret_cast<char*>(g.origin.data()), 3 * sizeof(double));
  std::uint8_t b;
  in.read(reinterpret_cast<char*>(&b), 1);
  g.boundary = b ? Boundary::periodic : Boundary::dirichlet_zero;
  ScalarField u(g);
  in.read(reinterpret_cast<char*>(u.v.data()),
          static_cast<std::streamsize>(u.v.size() * sizeof(double)));
  if (!in) throw std::runtime_error("read_field: truncated file");
  return u;
}

void write_field_csv(const std::string& path, const ScalarField& u) {
  std::ostringstream out;
  out.precision(17);
  const Grid& g = u.grid;
  out << "i,j,k,x,y,z,value\n";
  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const VecN x = g.cell_center(i, j, k);
        out << i << ',' << j << ',' << k << ',' << x[0] << ',' << (g.n > 1 ? x[1] : 0.0) << ','
            << (g.n > 2 ? x[2] : 0.0) << ',' << u[g.index(i, j, k)] << '\n';
      }
  write_text_atomic(path, out.str());
}

void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj) {
  std::ostringstream out;
  out.precision(17);
  out << "t,mass,energy,l2,lap_l2,inner_iters\n";
  for (const auto& d : traj.diag)
    out << d.t << ',' << d.mass << ',' << d.energy << ',' << d.l2 << ',' << d.lap_l2 << ','
        << d.inner_iterations << '\n';
  write_text_atomic(path, out.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? ',' : '\n');
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? ',' : '\n');
  write_text_atomic(path, out.str());
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("write_text_atomic: cannot open " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write_text_atomic: write failed " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace finsler
