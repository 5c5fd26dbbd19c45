#include "shadowmap/vision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace shadowmap::vision {

namespace {

// leftmost column of a square whose centroid should track center_x
int square_left(double center_x, int size) {
    return static_cast<int>(std::lround(center_x - (size - 1) / 2.0));
}

} // namespace

SceneLayout SceneLayout::defaults(int n_objects) {
    if (n_objects < 1)
        throw std::invalid_argument("SceneLayout: need at least one object");
    SceneLayout layout;
    const double half = (layout.square_size - 1) / 2.0;
    for (int i = 0; i < n_objects; ++i) {
        ObjectLayout obj;
        obj.row_center = static_cast<int>(
            std::lround((i + 1) * layout.height / static_cast<double>(n_objects + 1)));
        obj.range_min = half;
        obj.range_max = layout.width - 1 - half;
        layout.objects.push_back(obj);
    }
    layout.validate();
    return layout;
}

void SceneLayout::validate() const {
    if (objects.empty())
        throw std::invalid_argument("SceneLayout: no objects");
    if (square_size < 1 || width < square_size || height < square_size)
        throw std::invalid_argument("SceneLayout: square does not fit the frame");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& obj = objects[i];
        const int top = obj.row_center - square_size / 2;
        if (top < 0 || top + square_size > height)
            throw std::invalid_argument("SceneLayout: row band leaves the frame");
        if (!(obj.range_max > obj.range_min))
            throw std::invalid_argument("SceneLayout: empty travel range");
        for (double state : {0.0, 1.0}) {
            const double cx = obj.range_min + state * (obj.range_max - obj.range_min);
            const int left = square_left(cx, square_size);
            if (left < 0 || left + square_size > width)
                throw std::invalid_argument("SceneLayout: travel range leaves the frame");
        }
        for (std::size_t j = i + 1; j < objects.size(); ++j) {
            const int top_j = objects[j].row_center - square_size / 2;
            if (top < top_j + square_size && top_j < top + square_size)
                throw std::invalid_argument("SceneLayout: row bands overlap");
        }
    }
}

std::vector<Frame> render(const Eigen::MatrixXd& trajectory,
                          const SceneLayout& layout) {
    layout.validate();
    if (trajectory.cols() != static_cast<Eigen::Index>(layout.objects.size()))
        throw std::invalid_argument("render: trajectory column count != object count");
    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(trajectory.rows()));
    for (Eigen::Index t = 0; t < trajectory.rows(); ++t) {
        Frame f;
        f.width = layout.width;
        f.height = layout.height;
        f.pixels = Eigen::MatrixXd::Zero(layout.height, layout.width);
        for (std::size_t o = 0; o < layout.objects.size(); ++o) {
            const auto& obj = layout.objects[o];
            const double state = trajectory(t, static_cast<Eigen::Index>(o));
            const double cx = obj.range_min + state * (obj.range_max - obj.range_min);
            const int left = square_left(cx, layout.square_size);
            const int top = layout.band_top(static_cast<int>(o));
            f.pixels.block(top, left, layout.square_size, layout.square_size)
                .setConstant(1.0);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

namespace {

struct Component {
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    int size = 0;
};

std::vector<Component> connected_components(const Frame& f) {
    const int H = f.height, W = f.width;
    std::vector<char> visited(static_cast<std::size_t>(H) * W, 0);
    auto at = [&](int r, int c) -> char& {
        return visited[static_cast<std::size_t>(r) * W + c];
    };
    std::vector<Component> comps;
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (f.pixels(r, c) < 0.5 || at(r, c))
                continue;
            Component comp;
            double sum_r = 0.0, sum_c = 0.0;
            stack.push_back({r, c});
            at(r, c) = 1;
            while (!stack.empty()) {
                auto [cr, cc] = stack.back();
                stack.pop_back();
                comp.size += 1;
                sum_r += cr;
                sum_c += cc;
                const int dr[] = {-1, 1, 0, 0};
                const int dc[] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int nr = cr + dr[d], nc = cc + dc[d];
                    if (nr < 0 || nr >= H || nc < 0 || nc >= W)
                        continue;
                    if (f.pixels(nr, nc) >= 0.5 && !at(nr, nc)) {
                        at(nr, nc) = 1;
                        stack.push_back({nr, nc});
                    }
                }
            }
            comp.centroid_row = sum_r / comp.size;
            comp.centroid_col = sum_c / comp.size;
            comps.push_back(comp);
        }
    }
    return comps;
}

} // namespace

Eigen::MatrixXd extract_positions(const std::vector<Frame>& frames,
                                  const SceneLayout& layout) {
    layout.validate();
    if (frames.empty())
        throw std::invalid_argument("extract_positions: no frames");
    const auto n_obj = static_cast<int>(layout.objects.size());
    Eigen::MatrixXd positions(static_cast<Eigen::Index>(frames.size()), n_obj);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        auto comps = connected_components(frames[t]);
        if (static_cast<int>(comps.size()) != n_obj)
            throw std::runtime_error("extract_positions: frame " + std::to_string(t) +
                                     " has " + std::to_string(comps.size()) +
                                     " components, expected " + std::to_string(n_obj));
        std::vector<bool> taken(comps.size(), false);
        for (int o = 0; o < n_obj; ++o) {
            const int top = layout.band_top(o);
            int found = -1;
            for (std::size_t c = 0; c < comps.size(); ++c) {
                if (taken[c]) continue;
                if (comps[c].centroid_row >= top &&
                    comps[c].centroid_row < top + layout.square_size) {
                    found = static_cast<int>(c);
                    break;
                }
            }
            if (found < 0)
                throw std::runtime_error("extract_positions: frame " + std::to_string(t) +
                                         " has no component in object " +
                                         std::to_string(o) + "'s row band");
            taken[static_cast<std::size_t>(found)] = true;
            const auto& obj = layout.objects[static_cast<std::size_t>(o)];
            positions(static_cast<Eigen::Index>(t), o) =
                (comps[static_cast<std::size_t>(found)].centroid_col - obj.range_min) /
                (obj.range_max - obj.range_min);
        }
    }
    return positions;
}

void write_pgm(const std::string& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
    for (int r = 0; r < frame.height; ++r)
        for (int c = 0; c < frame.width; ++c) {
            const double v = std::clamp(frame.pixels(r, c), 0.0, 1.0);
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            out.put(static_cast<char>(byte));
        }
    if (!out)
        throw std::runtime_error("write_pgm: write failed for " + path);
}

Frame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5")
        throw std::runtime_error("read_pgm: not a binary PGM: " + path);
    int width, height, maxval;
    in >> width >> height >> maxval;
    if (!in || width < 1 || height < 1 || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported header in " + path);
    in.get();  // single whitespace after maxval
    Frame f;
    f.width = width;
    f.height = height;
    f.pixels.resize(height, width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const int byte = in.get();
            if (byte < 0)
                throw std::runtime_error("read_pgm: truncated data in " + path);
            f.pixels(r, c) = byte / 255.0;
        }
    return f;
}

void write_frames(const std::string& dir, const std::vector<Frame>& frames) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t t = 0; t < frames.size(); ++t) {
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", t);
        write_pgm((std::filesystem::path(dir) / name).string(), frames[t]);
    }
}

std::vector<Frame> read_frames(const std::string& dir) {
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".pgm")
            paths.push_back(entry.path());
    if (paths.empty())
        throw std::runtime_error("read_frames: no .pgm files in " + dir);
    std::sort(paths.begin(), paths.end());
    std::vector<Frame> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths)
        frames.push_back(read_pgm(p.string()));
    return frames;
}

} // namespace shadowmap::vision
