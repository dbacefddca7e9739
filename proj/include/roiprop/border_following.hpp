// Topological border following on binary masks (Suzuki & Abe style).
//
// Foreground is 8-connected, background 4-connected. Every border found
// during the raster scan receives a sequential number; outer borders start a
// new connected component, hole borders inherit the component of their parent.
// Interior pixels take the component of the last border crossed on their row.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace roiprop {

struct Border {
  int id = 0;         // sequential border number, starts at 2
  bool outer = true;  // false for hole borders
  int parent = 1;     // 1 = the frame itself
  int component = -1;
  std::vector<std::array<int, 2>> points;  // (x, y), unpadded coordinates
};

struct BorderTracing {
  int width = 0;
  int height = 0;
  std::vector<Border> borders;
  std::vector<int> labels;  // per pixel component id, -1 for background
  int component_count = 0;
};

namespace detail {

// Clockwise neighbour order starting east, in image coordinates (y down).
inline constexpr std::array<int, 8> kDx = {1, 1, 0, -1, -1, -1, 0, 1};
inline constexpr std::array<int, 8> kDy = {0, 1, 1, 1, 0, -1, -1, -1};

inline int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return -1;
}

}  // namespace detail

/// Traces all borders of a row-major binary mask (nonzero = foreground).
inline BorderTracing follow_borders(const std::vector<std::uint8_t>& mask, int width, int height) {
  using detail::kDx;
  using detail::kDy;
  BorderTracing result;
  result.width = width;
  result.height = height;
  result.labels.assign(static_cast<std::size_t>(width) * height, -1);

  // Padded working image with a one-pixel zero frame.
  const int pw = width + 2;
  const int ph = height + 2;
  std::vector<int> f(static_cast<std::size_t>(pw) * ph, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      f[static_cast<std::size_t>(y + 1) * pw + (x + 1)] = mask[static_cast<std::size_t>(y) * width + x] ? 1 : 0;
  auto at = [&](int x, int y) -> int& { return f[static_cast<std::size_t>(y) * pw + x]; };

  // border_info[nbd] for nbd >= 2; index 1 is the frame (a hole border).
  struct Info {
    bool outer;
    int parent;
    int component;
  };
  std::vector<Info> info(2, Info{false, 0, -1});

  int nbd = 1;
  for (int y = 1; y < ph - 1; ++y) {
    int lnbd = 1;
    for (int x = 1; x < pw - 1; ++x) {
      const int fij = at(x, y);
      if (fij == 0) continue;

      bool start = false;
      bool outer = false;
      int from_x = 0;
      if (fij == 1 && at(x - 1, y) == 0) {
        start = true;
        outer = true;
        from_x = x - 1;
      } else if (fij >= 1 && at(x + 1, y) == 0) {
        start = true;
        outer = false;
        from_x = x + 1;
        if (fij > 1) lnbd = fij;
      }

      if (start) {
        ++nbd;
        const Info& prev = info[static_cast<std::size_t>(lnbd)];
        int parent;
        if (outer)
          parent = prev.outer ? prev.parent : lnbd;
        else
          parent = prev.outer ? lnbd : prev.parent;
        int component;
        if (outer)
          component = result.component_count++;
        else
          component = info[static_cast<std::size_t>(parent)].component;
        info.push_back(Info{outer, parent, component});

        Border border;
        border.id = nbd;
        border.outer = outer;
        border.parent = parent;
        border.component = component;

        // (3.1) clockwise search from (from_x, y) for a nonzero pixel
        const int start_dir = detail::direction_of(from_x - x, 0);
        int found = -1;
        for (int k = 0; k < 8; ++k) {
          const int d = (start_dir + k) % 8;
          if (at(x + kDx[d], y + kDy[d]) != 0) {
            found = d;
            break;
          }
        }
        if (found < 0) {
          // (3.2) isolated pixel
          at(x, y) = -nbd;
          border.points.push_back({x - 1, y - 1});
        } else {
          int x1 = x + kDx[found];
          int y1 = y + kDy[found];
          int x2 = x1, y2 = y1;
          int x3 = x, y3 = y;
          for (;;) {
            // (3.3) counterclockwise search around (x3,y3) starting after (x2,y2)
            const int back = detail::direction_of(x2 - x3, y2 - y3);
            bool east_examined_zero = false;
            int x4 = 0, y4 = 0;
            for (int k = 1; k <= 8; ++k) {
              const int d = ((back - k) % 8 + 8) % 8;
              const int nx = x3 + kDx[d];
              const int ny = y3 + kDy[d];
              if (d == 0 && at(nx, ny) == 0) east_examined_zero = true;
              if (at(nx, ny) != 0) {
                x4 = nx;
                y4 = ny;
                break;
              }
            }
            // (3.4) relabel (x3,y3)
            if (east_examined_zero)
              at(x3, y3) = -nbd;
            else if (at(x3, y3) == 1)
              at(x3, y3) = nbd;
            border.points.push_back({x3 - 1, y3 - 1});
            // (3.5) back at the start with the same entry pixel
            if (x4 == x && y4 == y && x3 == x1 && y3 == y1) break;
            x2 = x3;
            y2 = y3;
            x3 = x4;
            y3 = y4;
          }
        }
        result.borders.push_back(std::move(border));
      }
      // (4) remember the last border crossed
      const int cur = at(x, y);
      if (cur != 1) lnbd = cur < 0 ? -cur : cur;
    }
  }

  // Component labels: border pixels by their label, interior by the last
  // border crossed on the row.
  for (int y = 1; y < ph - 1; ++y) {
    int last = -1;
    for (int x = 1; x < pw - 1; ++x) {
      const int v = at(x, y);
      if (v == 0) continue;
      if (v != 1) last = info[static_cast<std::size_t>(v < 0 ? -v : v)].component;
      result.labels[static_cast<std::size_t>(y - 1) * width + (x - 1)] = last;
    }
  }
  return result;
}

}  // namespace roiprop
