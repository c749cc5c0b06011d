#include "smile/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "smile/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "cube files are little-endian; big-endian hosts are unsupported");

namespace smile {

namespace {

struct RasterHeader {
  int height = 0, width = 0, channels = 0;
};

void write_raster(const std::filesystem::path& stem, int h, int w, int c,
                  const Eigen::ArrayXd& values) {
  nlohmann::ordered_json header;
  header["height"] = h;
  header["width"] = w;
  header["channels"] = c;
  header["dtype"] = "f32";
  header["layout"] = "bip";
  header["endianness"] = "little";
  write_text_file(stem.string() + ".json", header.dump(2) + "\n");

  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw DataError("write_raster: cannot open " + stem.string() + ".bin");
  std::vector<float> buf(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(values[i]);
  bin.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!bin) throw DataError("write_raster: short write to " + stem.string() + ".bin");
}

std::pair<RasterHeader, Eigen::ArrayXd> read_raster(const std::filesystem::path& stem) {
  std::ifstream hdr(stem.string() + ".json");
  if (!hdr) throw DataError("read_raster: cannot open " + stem.string() + ".json");
  nlohmann::json header = nlohmann::json::parse(hdr);
  RasterHeader info;
  info.height = header.at("height").get<int>();
  info.width = header.at("width").get<int>();
  info.channels = header.at("channels").get<int>();
  if (header.at("dtype").get<std::string>() != "f32" ||
      header.at("layout").get<std::string>() != "bip" ||
      header.at("endianness").get<std::string>() != "little") {
    throw DataError("read_raster: unsupported dtype/layout/endianness in " + stem.string());
  }

  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw DataError("read_raster: cannot open " + stem.string() + ".bin");
  const std::size_t count = static_cast<std::size_t>(info.height) * info.width * info.channels;
  std::vector<float> buf(count);
  bin.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(bin.gcount()) != count * sizeof(float)) {
    throw DataError("read_raster: truncated data file " + stem.string() + ".bin");
  }
  Eigen::ArrayXd values(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) values[static_cast<Eigen::Index>(i)] = buf[i];
  return {info, std::move(values)};
}

}  // namespace

void write_cube(const std::filesystem::path& stem, const HsiCube& cube) {
  write_raster(stem, cube.height, cube.width, cube.channels, cube.values);
}

HsiCube read_cube(const std::filesystem::path& stem) {
  auto [info, values] = read_raster(stem);
  return HsiCube(info.height, info.width, info.channels, std::move(values));
}

void write_abundance(const std::filesystem::path& stem, const AbundanceMap& map) {
  write_raster(stem, map.height, map.width, map.count, map.values);
}

AbundanceMap read_abundance(const std::filesystem::path& stem) {
  auto [info, values] = read_raster(stem);
  return AbundanceMap(info.height, info.width, info.channels, std::move(values));
}

void write_endmembers_csv(const std::filesystem::path& path, const EndmemberMatrix& e) {
  std::ofstream out(path);
  if (!out) throw DataError("write_endmembers_csv: cannot open " + path.string());
  out << std::setprecision(17);
  for (int i = 0; i < e.count(); ++i) {
    for (int j = 0; j < e.channels(); ++j) {
      if (j) out << ',';
      out << e.values(i, j);
    }
    out << '\n';
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<StepLog>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("write_history_csv: cannot open " + path.string());
  out << std::setprecision(17);
  out << "iteration,l1,l2,l3,l4,total\n";
  for (const StepLog& log : history) {
    out << log.iteration << ',' << log.losses.l1 << ',' << log.losses.l2 << ',' << log.losses.l3
        << ',' << log.losses.l4 << ',' << log.losses.total << '\n';
  }
}

void write_affinity_csv(const std::filesystem::path& path,
                        const std::vector<AffinityRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("write_affinity_csv: cannot open " + path.string());
  out << std::setprecision(17);
  out << "iteration,lambda,bound,g1_dot_g2,cos,l1_before,l1_mtl_step,l1_single_step\n";
  for (const AffinityRecord& r : records) {
    out << r.iteration << ',' << r.lambda << ',' << r.bound << ',' << r.dot << ',' << r.cosine
        << ',' << r.l1_before << ',' << r.l1_mtl_step << ',' << r.l1_single_step << '\n';
  }
}

void write_pgm(const std::filesystem::path& path, const AbundanceMap& map, int channel) {
  if (channel < 0 || channel >= map.count) throw DimensionError("write_pgm: channel out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_pgm: cannot open " + path.string());
  double peak = 0.0;
  const int n = map.pixels();
  for (int i = 0; i < n; ++i) {
    peak = std::max(peak, map.values[static_cast<Eigen::Index>(i) * map.count + channel]);
  }
  out << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(map.width));
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double v = map(y, x, channel);
      const double scaled = peak > 0.0 ? 255.0 * v / peak : 0.0;
      row[static_cast<std::size_t>(x)] =
          static_cast<unsigned char>(std::clamp(std::lround(scaled), 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(row.data()), map.width);
  }
}

void write_kernel_csv(const std::filesystem::path& path, const Eigen::MatrixXd& kernel) {
  std::ofstream out(path);
  if (!out) throw DataError("write_kernel_csv: cannot open " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
    for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
      if (j) out << ',';
      out << kernel(i, j);
    }
    out << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_text_file: cannot open " + path.string());
  out << text;
  if (!out) throw DataError("write_text_file: short write to " + path.string());
}

}  // namespace smile
