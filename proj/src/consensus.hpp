#pragma once

#include <string>
#include <vector>

#include "errors.hpp"
#include "netgraph.hpp"

namespace dnc {

// One payload block per node. Blocks may be vectors or matrices; they are
// mixed entrywise. Every function returns a fresh stack, never mutating its
// inputs, and sums over in-neighbors in ascending index order.
template <class Block>
using Stack = std::vector<Block>;

namespace detail {
template <class Block>
void check_stack(const Topology& w, const Stack<Block>& s, const char* what) {
  if (static_cast<int>(s.size()) != w.node_count)
    fail(ErrorCode::invalid_argument, std::string(what) + ": stack has " + std::to_string(s.size()) +
                                          " blocks, topology has " + std::to_string(w.node_count) + " nodes");
  for (const auto& b : s)
    if (b.rows() != s.front().rows() || b.cols() != s.front().cols())
      fail(ErrorCode::invalid_argument, std::string(what) + ": blocks differ in shape");
}

template <class Block>
void check_same_shape(const Stack<Block>& a, const Stack<Block>& b, const char* what) {
  if (a.size() != b.size() || (!a.empty() && (a.front().rows() != b.front().rows() || a.front().cols() != b.front().cols())))
    fail(ErrorCode::invalid_argument, std::string(what) + ": stacks differ in size or block shape");
}
}  // namespace detail

// v <- W v
template <class Block>
Stack<Block> static_step(const Topology& w, const Stack<Block>& v) {
  detail::check_stack(w, v, "static_step");
  Stack<Block> out(v.size());
  for (int i = 0; i < w.node_count; ++i) {
    Block acc = Block::Zero(v[0].rows(), v[0].cols());
    for (int j : w.in_neighbors[i]) acc += w.weights(i, j) * v[j];
    out[i] = std::move(acc);
  }
  return out;
}

// s_{k+1} = W s_k + v_{k+1} - v_k
template <class Block>
Stack<Block> dynamic_step_message(const Topology& w, const Stack<Block>& s, const Stack<Block>& v_new,
                                  const Stack<Block>& v_old) {
  detail::check_stack(w, s, "dynamic_step_message");
  detail::check_same_shape(s, v_new, "dynamic_step_message");
  detail::check_same_shape(s, v_old, "dynamic_step_message");
  Stack<Block> out = static_step(w, s);
  for (int i = 0; i < w.node_count; ++i) out[i] += v_new[i] - v_old[i];
  return out;
}

// u_{k+1} = W (u_k + v_{k+1} - v_k)
template <class Block>
Stack<Block> dynamic_step_estimate(const Topology& w, const Stack<Block>& u, const Stack<Block>& v_new,
                                   const Stack<Block>& v_old) {
  detail::check_stack(w, u, "dynamic_step_estimate");
  detail::check_same_shape(u, v_new, "dynamic_step_estimate");
  detail::check_same_shape(u, v_old, "dynamic_step_estimate");
  Stack<Block> pre(u.size());
  for (int i = 0; i < w.node_count; ++i) pre[i] = u[i] + v_new[i] - v_old[i];
  return static_step(w, pre);
}

template <class Block>
Block stack_mean(const Stack<Block>& s) {
  require(!s.empty(), "stack_mean: empty stack");
  Block acc = Block::Zero(s[0].rows(), s[0].cols());
  for (const auto& b : s) acc += b;
  return acc / static_cast<double>(s.size());
}

}  // namespace dnc
