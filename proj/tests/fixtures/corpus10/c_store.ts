interface Entry {
  key: string;
  value: number;
}

export class Store {
  private entries: Entry[] = [];
  add(key: string, value: number): void {
    this.entries.push({ key, value });
  }
}
