public class Router {
    private Route mHome = new Route();
    private String mName;

    private void go(Route route) {
    }

    public void home() {
        System.out.println(mName);
        <start>go(dest);<end>
    }
}
