export function pairwise<T>(items: T[]): Array<[T, T]> {
  const out: Array<[T, T]> = [];
  for (let i = 0; i + 1 < items.length; i++) {
    out.push([items[i], items[i + 1]]);
  }
  return out;
}
