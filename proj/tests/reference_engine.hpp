#pragma once

// Naive array-based Othello rules, used only as an oracle against the
// bitboard engine. Deliberately written in the most literal style possible.

#include <cstdint>
#include <vector>

#include "owml/othello.hpp"

namespace owml::ref {

inline int cell(const Board& b, int r, int c) {
    const std::uint64_t bit = 1ULL << (r * 8 + c);
    if (b.black & bit) return 1;
    if (b.white & bit) return 2;
    return 0;
}

inline std::vector<Tile> legal_moves_naive(const Board& b) {
    const int me = b.to_move == Player::Black ? 1 : 2;
    const int opp = 3 - me;
    static const int dr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static const int dc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    std::vector<Tile> out;
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            if (cell(b, r, c) != 0) continue;
            bool legal = false;
            for (int d = 0; d < 8 && !legal; ++d) {
                int rr = r + dr[d], cc = c + dc[d];
                int seen_opp = 0;
                while (rr >= 0 && rr < 8 && cc >= 0 && cc < 8 &&
                       cell(b, rr, cc) == opp) {
                    ++seen_opp;
                    rr += dr[d];
                    cc += dc[d];
                }
                if (seen_opp > 0 && rr >= 0 && rr < 8 && cc >= 0 && cc < 8 &&
                    cell(b, rr, cc) == me)
                    legal = true;
            }
            if (legal) out.push_back(static_cast<Tile>(r * 8 + c));
        }
    }
    return out;
}

inline Board apply_move_naive(const Board& b, Tile t) {
    const int me = b.to_move == Player::Black ? 1 : 2;
    const int opp = 3 - me;
    static const int dr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    static const int dc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    Board out = b;
    std::uint64_t& mine = me == 1 ? out.black : out.white;
    std::uint64_t& theirs = me == 1 ? out.white : out.black;
    mine |= 1ULL << t;
    const int r0 = t / 8, c0 = t % 8;
    for (int d = 0; d < 8; ++d) {
        int rr = r0 + dr[d], cc = c0 + dc[d];
        std::vector<int> line;
        while (rr >= 0 && rr < 8 && cc >= 0 && cc < 8 && cell(b, rr, cc) == opp) {
            line.push_back(rr * 8 + cc);
            rr += dr[d];
            cc += dc[d];
        }
        if (!line.empty() && rr >= 0 && rr < 8 && cc >= 0 && cc < 8 &&
            cell(b, rr, cc) == me) {
            for (int i : line) {
                mine |= 1ULL << i;
                theirs &= ~(1ULL << i);
            }
        }
    }
    out.to_move = other(b.to_move);
    return out;
}

inline std::uint64_t perft_naive(const Board& b, int depth) {
    if (depth == 0) return 1;
    auto moves = legal_moves_naive(b);
    if (moves.empty()) {
        Board passed = b;
        passed.to_move = other(b.to_move);
        if (legal_moves_naive(passed).empty()) return 1;  // game over
        return perft_naive(passed, depth);  // pass consumes no depth
    }
    std::uint64_t n = 0;
    for (Tile t : moves) n += perft_naive(apply_move_naive(b, t), depth - 1);
    return n;
}

inline std::uint64_t stability_naive(const Board& b, bool eight_adjacency = false) {
    bool occ[8][8], stable[8][8] = {};
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) occ[r][c] = cell(b, r, c) != 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                if (!occ[r][c] || stable[r][c]) continue;
                bool is_corner = (r == 0 || r == 7) && (c == 0 || c == 7);
                bool is_edge = r == 0 || r == 7 || c == 0 || c == 7;
                bool mark = false;
                if (is_corner) {
                    mark = true;
                } else if (is_edge) {
                    static const int d4r[4] = {-1, 1, 0, 0};
                    static const int d4c[4] = {0, 0, -1, 1};
                    const int n = eight_adjacency ? 8 : 4;
                    static const int d8r[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
                    static const int d8c[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
                    for (int d = 0; d < n; ++d) {
                        int rr = r + (eight_adjacency ? d8r[d] : d4r[d]);
                        int cc = c + (eight_adjacency ? d8c[d] : d4c[d]);
                        if (rr >= 0 && rr < 8 && cc >= 0 && cc < 8 && stable[rr][cc])
                            mark = true;
                    }
                } else {
                    mark = true;
                    static const int d8r[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
                    static const int d8c[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
                    for (int d = 0; d < 8; ++d)
                        if (!stable[r + d8r[d]][c + d8c[d]]) mark = false;
                }
                if (mark) {
                    stable[r][c] = true;
                    changed = true;
                }
            }
        }
    }
    std::uint64_t out = 0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (stable[r][c]) out |= 1ULL << (r * 8 + c);
    return out;
}

}  // namespace owml::ref
