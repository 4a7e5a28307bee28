export enum Status {
  Active = "active",
  Paused = "paused",
  Closed = "closed",
}
