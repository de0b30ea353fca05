#include "vit5/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace vit5 {

namespace {

// Header tokens are separated by whitespace; '#' starts a comment to EOL.
int next_header_int(std::istream& in, const std::string& path, const char* what) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw IoError("pnm: malformed header in '" + path + "': missing " + what);
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value) || value < 0) {
        throw IoError("pnm: malformed header in '" + path + "': bad " + std::string(what));
    }
    return value;
}

}  // namespace

RawImage read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pnm: cannot open '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || (m1 != '5' && m1 != '6')) {
        throw IoError("pnm: unknown magic in '" + path + "' (want P5 or P6)");
    }
    RawImage img;
    img.channels = m1 == '5' ? 1 : 3;
    img.width = next_header_int(in, path, "width");
    img.height = next_header_int(in, path, "height");
    const int maxval = next_header_int(in, path, "maxval");
    if (img.width < 1 || img.height < 1) {
        throw IoError("pnm: malformed header in '" + path + "': empty image");
    }
    if (maxval < 1 || maxval > 255) {
        throw IoError("pnm: unsupported maxval " + std::to_string(maxval) + " in '" + path +
                      "' (want <= 255)");
    }
    in.get();  // single whitespace byte after maxval

    const std::size_t count =
        static_cast<std::size_t>(img.width) * img.height * img.channels;
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (in.gcount() != static_cast<std::streamsize>(count)) {
        throw IoError("pnm: truncated pixel data in '" + path + "'");
    }
    // Interleaved (P6) to planar, scaled by maxval.
    img.pixels.resize(count);
    const double inv = 1.0 / static_cast<double>(maxval);
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < img.channels; ++c) {
            img.pixels[static_cast<std::size_t>(c) * plane + i] =
                static_cast<double>(raw[i * img.channels + c]) * inv;
        }
    }
    return img;
}

namespace {

void write_pnm(const std::string& path, const double* pixels, int width, int height,
               int channels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("pnm: cannot open '" + path + "' for writing");
    out << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> raw(plane * channels);
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < channels; ++c) {
            const double v = std::clamp(pixels[static_cast<std::size_t>(c) * plane + i], 0.0, 1.0);
            raw[i * channels + c] = static_cast<unsigned char>(std::lrint(v * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("pnm: write failed for '" + path + "'");
}

}  // namespace

void write_pgm(const std::string& path, const double* pixels, int width, int height) {
    write_pnm(path, pixels, width, height, 1);
}

void write_ppm(const std::string& path, const double* pixels, int width, int height) {
    write_pnm(path, pixels, width, height, 3);
}

RawImage resize_nearest(const RawImage& img, int resolution) {
    RawImage out;
    out.width = resolution;
    out.height = resolution;
    out.channels = img.channels;
    out.pixels.resize(static_cast<std::size_t>(resolution) * resolution * img.channels);
    const std::size_t src_plane = static_cast<std::size_t>(img.width) * img.height;
    const std::size_t dst_plane = static_cast<std::size_t>(resolution) * resolution;
    for (int y = 0; y < resolution; ++y) {
        const int sy = std::min<int>(img.height - 1,
                                     static_cast<int>((2 * y + 1) * img.height / (2 * resolution)));
        for (int x = 0; x < resolution; ++x) {
            const int sx = std::min<int>(
                img.width - 1, static_cast<int>((2 * x + 1) * img.width / (2 * resolution)));
            for (int c = 0; c < img.channels; ++c) {
                out.pixels[static_cast<std::size_t>(c) * dst_plane +
                           static_cast<std::size_t>(y) * resolution + x] =
                    img.pixels[static_cast<std::size_t>(c) * src_plane +
                               static_cast<std::size_t>(sy) * img.width + sx];
            }
        }
    }
    return out;
}

Batch load_ppm_dir(const std::string& dir, int resolution) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("pnm: '" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("pnm: no .ppm/.pgm files under '" + dir + "'");

    std::vector<double> data;
    std::vector<std::int64_t> labels;
    int channels = 0;
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const auto us = stem.find('_');
        const std::string label_str = us == std::string::npos ? stem : stem.substr(0, us);
        std::int64_t label = -1;
        try {
            std::size_t used = 0;
            label = std::stoll(label_str, &used);
            if (used != label_str.size() || label < 0) label = -1;
        } catch (...) {
            label = -1;
        }
        if (label < 0) {
            throw IoError("pnm: cannot parse label from filename '" + f.filename().string() +
                          "' (want <label>_<id>)");
        }
        RawImage img = resize_nearest(read_pnm(f.string()), resolution);
        if (channels == 0) channels = img.channels;
        if (img.channels != channels) {
            throw IoError("pnm: mixed channel counts under '" + dir + "'");
        }
        data.insert(data.end(), img.pixels.begin(), img.pixels.end());
        labels.push_back(label);
    }
    Batch b;
    b.images = Tensor::from_data(
        {static_cast<std::int64_t>(labels.size()), channels, resolution, resolution},
        std::move(data));
    b.labels = std::move(labels);
    return b;
}

}  // namespace vit5
