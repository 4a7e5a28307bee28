export const greet = (name: string): string => {
  return `Hello, ${name}!`;
};
